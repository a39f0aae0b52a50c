import logging
import logging.config
import multiprocessing
import sys

from config import load_config
from ethseq.cli.runner import run

if __name__ == "__main__":
    config = load_config()

    multiprocessing.freeze_support()

    logging.config.dictConfig(config.get("LoggingConfig"))

    logging.info("----- ethseq -----")

    sys.exit(run(sys.argv[1:], defaults=config))
