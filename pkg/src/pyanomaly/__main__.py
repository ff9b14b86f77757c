"""Run the pyanomaly command line."""
from .cli import main

raise SystemExit(main())
