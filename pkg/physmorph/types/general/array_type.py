from typing import Generic, TypeVar

import numpy as np
import torch

"""
Module that handles numpy arrays and torch tensors in Pydantic models.
Code adapted from: https://github.com/samuelcolvin/pydantic/issues/380
"""

T = TypeVar("T")


class _ArrayMeta(type):
    def __getitem__(self, t):
        """Handles when we do Array[float]"""
        return type("Array", (Array,), {"__dtype__": t})


class Array(np.ndarray, Generic[T], metaclass=_ArrayMeta):
    """Class that allow numpy arrays in Pydantic models."""

    @classmethod
    def __get_validators__(cls):
        yield cls.validate_type

    @classmethod
    def validate_type(cls, val):
        """Validate whether `val` is a numpy array."""
        dtype = getattr(cls, "__dtype__", None)
        if isinstance(val, torch.Tensor):
            val = val.detach().cpu().numpy()
        return np.asarray(val, dtype=dtype)


class Tensor(torch.Tensor):
    """Float64 torch tensor field.

    Tensors are passed through untouched, so autograd history survives validation. Anything
    else (lists, numpy arrays) is converted to a float64 CPU tensor.
    """

    @classmethod
    def __get_validators__(cls):
        yield cls.validate_type

    @classmethod
    def validate_type(cls, val):
        if isinstance(val, torch.Tensor):
            return val
        return torch.as_tensor(np.asarray(val, dtype=np.float64), dtype=torch.float64)


class IndexTensor(torch.Tensor):
    """Integer (int64) torch tensor field, used for neighbor and parent indices."""

    @classmethod
    def __get_validators__(cls):
        yield cls.validate_type

    @classmethod
    def validate_type(cls, val):
        if isinstance(val, torch.Tensor):
            return val.to(dtype=torch.int64)
        return torch.as_tensor(np.asarray(val, dtype=np.int64), dtype=torch.int64)
