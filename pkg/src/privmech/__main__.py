import sys

from privmech.cli import main

sys.exit(main())
