import sys

from rwtc.cli import main

sys.exit(main())
