from pathlib import Path

from physmorph.utils.logs import set_logger_config

PROJECT_ROOT = str(Path(__file__).parent)

set_logger_config()
