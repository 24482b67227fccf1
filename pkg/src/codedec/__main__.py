import sys

from codedec.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
