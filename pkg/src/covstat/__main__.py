import sys

from covstat.cli import main

sys.exit(main())
