from zaksplit.cli import main

raise SystemExit(main())
