import functools
from typing import Dict

import yaml


@functools.lru_cache(1)
def load_config(path: str = "config.yml") -> Dict:
    with open(path, "r") as ymlfile:
        d: Dict = yaml.safe_load(ymlfile)
        return d
