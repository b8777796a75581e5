import sys

from fmpgraph.cli import main

sys.exit(main())
