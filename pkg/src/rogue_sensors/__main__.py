import sys

from rogue_sensors.cli import main

sys.exit(main())
