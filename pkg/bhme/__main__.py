from bhme.cli import main

raise SystemExit(main())
