#
# MIT License
#
# Copyright (c) 2023 pseudo-marginal-glm-missing team
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
#
"""Dataclass-driven argument parser of the command line subcommands."""

import dataclasses
from argparse import ArgumentTypeError
from enum import Enum
from functools import partial
from typing import Any, Dict, List, NewType, Optional, Type, Union, get_args, get_origin

from transformers import HfArgumentParser

DataClassType = NewType("DataClassType", Any)  # type: ignore

TRUTHY = ("yes", "true", "t", "y", "1")
FALSY = ("no", "false", "f", "n", "0")


def parse_flag(value: Union[bool, str]) -> Optional[bool]:
    """Boolean of a flag value, None for an empty value.
    Args:
        value: value passed on the command line.
    Returns:
        the boolean or None.
    Raises:
        ArgumentTypeError: in case the value is neither truthy nor falsy.
    """
    if isinstance(value, bool):
        return value
    if not value:
        return None
    if value.lower() in TRUTHY:
        return True
    if value.lower() in FALSY:
        return False
    raise ArgumentTypeError(f"expected one of {'/'.join(TRUTHY + FALSY)} (case insensitive), got {value}")


def optional_value(value: Any, dtype: Type) -> Any:
    """Cast a value, mapping "", "none" and None to None."""
    if value is None or value == "" or str(value).lower() == "none":
        return None
    return dtype(value)


def option_names(name: str) -> List[str]:
    """Flag spellings of a field: --n_importance and --n-importance."""
    names = [f"--{name}"]
    if "_" in name:
        names.append(f"--{name.replace('_', '-')}")
    return names


def strip_optional(annotation: Any) -> Any:
    """Inner type of Optional[X], the annotation itself otherwise."""
    if get_origin(annotation) is Union:
        arguments = [argument for argument in get_args(annotation) if argument is not type(None)]
        if len(arguments) == 1:
            return arguments[0]
    return annotation


def _default(field: dataclasses.Field) -> Dict[str, Any]:
    if field.default is not dataclasses.MISSING:
        return {"default": field.default}
    if field.default_factory is not dataclasses.MISSING:  # type: ignore
        return {"default": field.default_factory()}  # type: ignore
    return {"required": True}


class ArgumentParser(HfArgumentParser):
    """HfArgumentParser where an optional field stays None unless given, booleans
    accept a bare flag and every underscored flag also has a dashed spelling."""

    def field_arguments(self, field: dataclasses.Field) -> Dict[str, Any]:
        """argparse keyword arguments of a dataclass field.
        Args:
            field: the dataclass field.
        Returns:
            keyword arguments of `add_argument`.
        Raises:
            ImportError: in case the annotations are postponed strings.
        """
        if isinstance(field.type, str):
            raise ImportError(
                f"field {field.name} has a string annotation, postponed evaluation of annotations is not supported"
            )
        kwargs = dict(field.metadata)
        annotation = strip_optional(field.type)
        if isinstance(annotation, type) and issubclass(annotation, Enum):
            choices = [member.value for member in annotation]
            kwargs.update(choices=choices, type=type(choices[0]))
            default = _default(field)
            if isinstance(default.get("default"), Enum):
                default["default"] = default["default"].value
            kwargs.update(default)
        elif annotation is bool:
            # a bare --flag means True
            kwargs.update(type=parse_flag, nargs="?", const=True)
            kwargs["default"] = None if field.default is dataclasses.MISSING else field.default
        elif get_origin(annotation) in (list, List):
            (item,) = get_args(annotation)
            kwargs.update(nargs="+", type=partial(optional_value, dtype=item))
            kwargs.update(_default(field))
        else:
            kwargs["type"] = partial(optional_value, dtype=annotation)
            kwargs.update(_default(field))
        return kwargs

    def _add_dataclass_arguments(self, dtype: DataClassType) -> None:
        """Add the arguments of a dataclass as one group titled by its docstring."""
        title = dtype.__doc__.strip().splitlines()[0] if dtype.__doc__ else None
        group = self.add_argument_group(title)
        for field in dataclasses.fields(dtype):
            if field.init:
                group.add_argument(*option_names(field.name), dest=field.name, **self.field_arguments(field))
