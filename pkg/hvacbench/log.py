import logging
import os
from pathlib import Path

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(log_dir: str | Path | None = None, verbose: bool | None = None) -> None:
    """Setup logging for CLI runs: one file handler plus stderr."""
    if verbose is None:
        verbose = os.getenv('HVACBENCH_VERBOSE', '0') == '1'
    log_dir = Path(log_dir or os.getenv('HVACBENCH_LOG_DIR', 'logs'))
    log_dir.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_dir / "hvacbench.log"),
            logging.StreamHandler()
        ],
        force=True,
    )
