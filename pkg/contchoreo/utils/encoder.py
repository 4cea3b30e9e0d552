import dataclasses
import json
from typing import Any

import numpy as np
from pydantic import BaseModel


class ChoreoJSONEncoder(json.JSONEncoder):
    """Custom JSON encoder adding support for numpy and model types.

    Complex numbers are written as ``[re, im]`` pairs.

    Usage:

    .. code::python

       json.dumps(my_value, cls=ChoreoJSONEncoder)
    """

    def default(self, obj) -> Any:
        """Encode objects to JSON values.

        Args:
            obj: The object to encode.

        Return:
            A valid type suitable for JSON encoding.
        """
        if isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, (complex, np.complexfloating)):
            return [float(obj.real), float(obj.imag)]
        elif isinstance(obj, np.ndarray):
            if np.iscomplexobj(obj):
                return np.stack([obj.real, obj.imag], axis=-1).tolist()
            return obj.tolist()
        elif isinstance(obj, BaseModel):
            return obj.dict()
        elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
        else:
            try:
                return super().default(obj)
            except TypeError:
                return str(obj)


def dumps(value: Any) -> str:
    """Serialise ``value`` the way every command writes JSON: sorted keys, one line."""
    return json.dumps(value, cls=ChoreoJSONEncoder, sort_keys=True) + "\n"
