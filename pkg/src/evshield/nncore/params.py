"""Ordered, named parameter collections and their on-disk container."""
import json
import math

import numpy as np

FORMAT_TAG = "evshield-params/1"


class ModelParameters:
    """Ordered mapping of parameter name to float64 array.

    Instances are treated as values: operations return new collections and
    never modify the arrays of their inputs.
    """

    def __init__(self, arrays):
        items = arrays.items() if hasattr(arrays, "items") else arrays
        self._arrays = {}
        for name, value in items:
            arr = np.asarray(value, dtype=np.float64)
            if name in self._arrays:
                raise ValueError(f"duplicate parameter name {name!r}")
            self._arrays[name] = arr

    def __getitem__(self, name):
        return self._arrays[name]

    def __contains__(self, name):
        return name in self._arrays

    def __iter__(self):
        return iter(self._arrays)

    def __len__(self):
        return len(self._arrays)

    def __repr__(self):
        shapes = ", ".join(f"{k}{v.shape}" for k, v in self._arrays.items())
        return f"ModelParameters({shapes})"

    def items(self):
        return self._arrays.items()

    def names(self):
        return list(self._arrays)

    @property
    def shapes(self):
        return [(k, v.shape) for k, v in self._arrays.items()]

    @property
    def total_scalar_count(self):
        return sum(v.size for v in self._arrays.values())

    def same_layout(self, other):
        return self.shapes == other.shapes

    def copy(self):
        return ModelParameters((k, v.copy()) for k, v in self._arrays.items())

    def map(self, fn, *others):
        for o in others:
            if not self.same_layout(o):
                raise ValueError("parameter layouts differ")
        return ModelParameters(
            (k, fn(v, *(o[k] for o in others))) for k, v in self._arrays.items()
        )

    def zeros_like(self):
        return ModelParameters((k, np.zeros_like(v)) for k, v in self._arrays.items())

    def flatten(self):
        if not self._arrays:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self._arrays.values()])

    def unflatten(self, vector):
        """Collection with this layout, filled from a flat vector."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1 or vector.size != self.total_scalar_count:
            raise ValueError(
                f"expected flat vector of {self.total_scalar_count} values, got shape {vector.shape}"
            )
        out, pos = [], 0
        for k, v in self._arrays.items():
            out.append((k, vector[pos:pos + v.size].reshape(v.shape).copy()))
            pos += v.size
        return ModelParameters(out)

    def array_equal(self, other):
        """Bitwise equality of names, shapes and values."""
        if self.shapes != other.shapes:
            return False
        return all(
            np.array_equal(v.view(np.uint64), other[k].view(np.uint64))
            for k, v in self._arrays.items()
        )

    def max_abs_diff(self, other):
        if not self.same_layout(other):
            raise ValueError("parameter layouts differ")
        return max(float(np.max(np.abs(v - other[k]), initial=0.0)) for k, v in self._arrays.items())

    # Serialization: JSON with hex-encoded doubles so the round trip is bit exact.

    def to_dict(self):
        return {
            "format": FORMAT_TAG,
            "arrays": [
                {
                    "name": k,
                    "shape": list(v.shape),
                    "dtype": "float64",
                    "data": [float(x).hex() for x in v.ravel()],
                }
                for k, v in self._arrays.items()
            ],
        }

    @classmethod
    def from_dict(cls, payload):
        if payload.get("format") != FORMAT_TAG:
            raise ValueError(f"unsupported parameter container {payload.get('format')!r}")
        arrays = []
        for entry in payload["arrays"]:
            shape = tuple(entry["shape"])
            data = np.array([float.fromhex(x) for x in entry["data"]], dtype=np.float64)
            if data.size != math.prod(shape):
                raise ValueError(f"array {entry['name']!r}: {data.size} values for shape {shape}")
            arrays.append((entry["name"], data.reshape(shape)))
        return cls(arrays)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
