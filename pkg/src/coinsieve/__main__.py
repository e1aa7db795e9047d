import sys

from coinsieve.cli import main

sys.exit(main())
