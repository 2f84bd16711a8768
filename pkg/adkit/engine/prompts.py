"""Prompt ensemble and text features.

Sentences are the product of object states and templates. Each class
(normal, abnormal) is reduced to one unit-norm row: every sentence embedding
is L2-normalized, the rows are averaged, and the mean is re-normalized.
"""

import functools
import logging
import re
from importlib import resources
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, field_validator

from adkit.core.exceptions import ConfigError, PreconditionError
from adkit.models.backbone import Backbone, encode_sentences
from adkit.schemas import FrozenSchema
from adkit.schemas.run import PromptConfig

logger = logging.getLogger(__name__)

STATE_SLOT = "{state}"
OBJECT_SLOT = "{object}"
PHRASE_SLOT = "{}"

TextEncoder = Callable[[Sequence[str]], np.ndarray]


def _named_slots(template: str) -> str:
    """Return the template with named slots, converting two positional ``{}``."""
    if template.count(STATE_SLOT) == 1 and template.count(OBJECT_SLOT) == 1:
        return template
    if template.count(PHRASE_SLOT) == 2 and STATE_SLOT not in template and OBJECT_SLOT not in template:
        return template.replace(PHRASE_SLOT, STATE_SLOT, 1).replace(PHRASE_SLOT, OBJECT_SLOT, 1)
    raise ValueError(f"template {template!r} needs one state slot and one object slot")


class PromptEnsemble(FrozenSchema):
    """States and templates for one object."""

    normal_states: List[str] = Field(..., min_length=1)
    abnormal_states: List[str] = Field(..., min_length=1)
    templates: List[str] = Field(..., min_length=1, examples=[["a photo of a {} {}"]])
    object_name: str = Field(..., min_length=1, examples=["bottle"])

    @field_validator("templates")
    @classmethod
    def validate_templates(cls, v: List[str]) -> List[str]:
        return [_named_slots(t) for t in v]


def _render(template: str, state: str, object_name: str) -> str:
    if PHRASE_SLOT not in state:
        return template.replace(STATE_SLOT, state).replace(OBJECT_SLOT, object_name)
    phrase = state.replace(PHRASE_SLOT, object_name)
    pair = f"{STATE_SLOT} {OBJECT_SLOT}"
    if pair in template:
        return template.replace(pair, phrase)
    return template.replace(STATE_SLOT, phrase).replace(OBJECT_SLOT, object_name)


def render_prompts(ensemble: PromptEnsemble) -> Tuple[List[str], List[str]]:
    """Render every state into every template, state-major.

    Args:
        ensemble: States, templates and object name

    Returns:
        Normal sentences and abnormal sentences

    Raises:
        PreconditionError: If a state or template list is empty
    """
    if not (ensemble.normal_states and ensemble.abnormal_states and ensemble.templates):
        raise PreconditionError("prompt ensemble lists must not be empty")

    def sentences(states: Sequence[str]) -> List[str]:
        return [_render(t, s, ensemble.object_name) for s in states for t in ensemble.templates]

    return sentences(ensemble.normal_states), sentences(ensemble.abnormal_states)


def _class_row(embeddings: np.ndarray) -> np.ndarray:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    embeddings = embeddings / np.linalg.norm(embeddings, axis=1, keepdims=True)
    mean = embeddings.mean(axis=0)
    return mean / np.linalg.norm(mean)


def encode_text_features(
    sentences_normal: Sequence[str],
    sentences_abnormal: Sequence[str],
    text_encoder: TextEncoder,
) -> np.ndarray:
    """Reduce both sentence lists to the 2 x C text feature matrix.

    Args:
        sentences_normal: Normal sentences
        sentences_abnormal: Abnormal sentences
        text_encoder: Maps sentences to raw embeddings [N, C]

    Returns:
        Float32 matrix with the normal row first and the abnormal row second

    Raises:
        PreconditionError: If either list is empty
    """
    if not sentences_normal or not sentences_abnormal:
        raise PreconditionError("both sentence lists must be non-empty")
    rows = [
        _class_row(text_encoder(list(sentences_normal))),
        _class_row(text_encoder(list(sentences_abnormal))),
    ]
    return np.stack(rows).astype(np.float32)


def _read_asset_lines(text: str) -> List[str]:
    return [
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]


def _read_list(path: Optional[Union[str, Path]], asset: str) -> List[str]:
    if path is None:
        return list(_shipped_asset(asset))
    try:
        return _read_asset_lines(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read prompt asset {path}: {e}")


@functools.lru_cache(maxsize=None)
def _shipped_asset(name: str) -> Tuple[str, ...]:
    text = resources.files("adkit").joinpath("assets", name).read_text(encoding="utf-8")
    return tuple(_read_asset_lines(text))


def default_template_set() -> List[str]:
    """Return the shipped template list (filtered CLIP templates)."""
    return list(_shipped_asset("templates.txt"))


def object_name_for(category: str) -> str:
    """Turn a dataset category into the object name used in prompts.

    ``metal_nut`` becomes ``metal nut`` and ``pcb1`` becomes ``pcb``.
    """
    name = re.sub(r"\d+$", "", category).replace("_", " ").strip()
    return name or category


def load_prompt_ensemble(
    object_name: str,
    templates_path: Optional[Union[str, Path]] = None,
    normal_path: Optional[Union[str, Path]] = None,
    abnormal_path: Optional[Union[str, Path]] = None,
) -> PromptEnsemble:
    """Build an ensemble from asset files, falling back to the shipped ones.

    Raises:
        ConfigError: If an override cannot be read or is invalid
    """
    try:
        return PromptEnsemble(
            normal_states=_read_list(normal_path, "states_normal.txt"),
            abnormal_states=_read_list(abnormal_path, "states_abnormal.txt"),
            templates=_read_list(templates_path, "templates.txt"),
            object_name=object_name,
        )
    except ValueError as e:
        raise ConfigError(f"invalid prompt assets: {e}")


def build_text_features(
    category: str, backbone: Backbone, prompts: Optional[PromptConfig] = None
) -> np.ndarray:
    """Text feature matrix of a dataset category.

    Args:
        category: Dataset category, converted with ``object_name_for``
        backbone: Encoder whose text tower embeds the sentences
        prompts: Optional asset overrides

    Returns:
        Float32 [2, C] matrix (normal, abnormal)
    """
    prompts = prompts or PromptConfig()
    ensemble = load_prompt_ensemble(
        object_name_for(category),
        prompts.templates,
        prompts.normal_states,
        prompts.abnormal_states,
    )
    normal, abnormal = render_prompts(ensemble)
    logger.debug(f"{category}: {len(normal)} normal / {len(abnormal)} abnormal prompts")
    return encode_text_features(
        normal,
        abnormal,
        lambda sentences: encode_sentences(backbone, tuple(sentences))[0],
    )
