import hashlib
import json
from enum import Enum
from typing import Any, Dict

import yaml


def _plain(value: Any) -> Any:
    """
    Flatten enums, tuples and nested configs into YAML/JSON friendly values.
    """
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Configurable):
        return value.to_dict()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


class Configurable:
    """
    Base class for objects that can be configured and serialized to/from YAML.

    Methods:
        to_dict: Plain dictionary of the public attributes, enums flattened.
        to_yaml: Serialize the object to YAML format.
        from_yaml: Deserialize the object from a YAML string.
        from_dict: Create an object from a dictionary.
        config_hash: Stable digest of every setting of the object.
    """

    def to_dict(self) -> Dict[str, Any]:
        """
        Plain dictionary view of the object, suitable for YAML or JSON.

        :returns: Attribute name to plain value.
        :rtype: Dict[str, Any]
        """
        return {k: _plain(v) for k, v in vars(self).items() if not k.startswith("_")}

    def to_yaml(self) -> str:
        """
        Serialize the object to a YAML-formatted string.

        :returns: YAML representation of the object.
        :rtype: str
        """
        cls_name = type(self).__name__
        yml = yaml.safe_dump({cls_name: self.to_dict()})
        return yml

    @classmethod
    def from_yaml(cls, yml: str) -> Any:
        """
        Deserialize an object from a YAML-formatted string.

        :param yml: YAML-formatted string.
        :type yml: str

        :returns: Deserialized object.
        :rtype: Any
        """
        d = yaml.safe_load(yml).get(cls.__name__)
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d: Dict[Any, Any]) -> Any:
        """
        Create an object from a dictionary.

        :param d: Dictionary containing attribute values.
        :type d: Dict[Any, Any]

        :returns: Created parent object.
        :rtype: Any
        """
        return cls(**(d or {}))

    def config_hash(self) -> str:
        """
        SHA-256 of the canonical JSON form of the configuration.

        :returns: Hex digest.
        :rtype: str
        """
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.to_dict() == other.to_dict()  # type: ignore

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"
