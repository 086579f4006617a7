import sys

from cheesetower.cli import main

sys.exit(main())
