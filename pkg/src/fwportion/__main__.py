import sys

from fwportion.cli import main

sys.exit(main())
