import sys

from issakit.cli import main

sys.exit(main())
