import sys

from csbc.cli import main

sys.exit(main())
