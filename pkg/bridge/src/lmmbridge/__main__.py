import sys

from lmmbridge.cli import main

sys.exit(main())
