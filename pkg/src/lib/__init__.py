import logging
from pathlib import Path

# Default locations, mirrors the per-user data directory layout
DATA_DIR = Path.home() / ".przkbind"
DEFAULT_REGISTRY_PATH = DATA_DIR / "registry.ndjson"
CONFIG_ENV = "PRZKBIND_CONFIG"

LOG_FORMAT = "[%(levelname)s]: %(message)s"
LOGGER = logging.getLogger("przkbind")

def setup_logging(level: int = logging.INFO) -> None:
    if not LOGGER.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        LOGGER.addHandler(handler)
    LOGGER.setLevel(level)
