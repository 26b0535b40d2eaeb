import sys

from ctclab.cli import main

sys.exit(main())
