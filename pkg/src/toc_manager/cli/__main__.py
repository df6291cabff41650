"""Allow running the simulator as: python -m toc_manager.cli"""

import sys
from toc_manager.cli.app import main

sys.exit(main())
