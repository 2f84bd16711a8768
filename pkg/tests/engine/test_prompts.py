"""Tests for the prompt ensemble and text features."""

import numpy as np
import pytest
from pydantic import ValidationError

from adkit.core.exceptions import ConfigError, PreconditionError
from adkit.engine.prompts import (
    PromptEnsemble,
    build_text_features,
    default_template_set,
    encode_text_features,
    load_prompt_ensemble,
    object_name_for,
    render_prompts,
)
from adkit.schemas.run import PromptConfig
from tests.mocks.text_encoder import RecordingTextEncoder


def test_render_prompts_example():
    """Test rendering with positional slots."""
    ensemble = PromptEnsemble(
        normal_states=["flawless"],
        abnormal_states=["damaged"],
        templates=["a photo of a {} {}"],
        object_name="bottle",
    )
    assert render_prompts(ensemble) == (["a photo of a flawless bottle"], ["a photo of a damaged bottle"])


def test_render_prompts_counts_and_order():
    """Test the state-major product of states and templates."""
    ensemble = PromptEnsemble(
        normal_states=["flawless", "perfect", "unblemished"],
        abnormal_states=["damaged"],
        templates=[f"photo {i} of a {{state}} {{object}}" for i in range(5)],
        object_name="screw",
    )
    normal, abnormal = render_prompts(ensemble)
    assert len(normal) == 15
    assert len(abnormal) == 5
    assert normal[0] == "photo 0 of a flawless screw"
    assert normal[5] == "photo 0 of a perfect screw"


def test_render_prompts_phrase_states():
    """Test that phrase states wrap the object name."""
    ensemble = PromptEnsemble(
        normal_states=["{} without defect"],
        abnormal_states=["{} with flaw"],
        templates=["a photo of the {state} {object}."],
        object_name="metal nut",
    )
    normal, abnormal = render_prompts(ensemble)
    assert normal == ["a photo of the metal nut without defect."]
    assert abnormal == ["a photo of the metal nut with flaw."]


@pytest.mark.parametrize(
    "field,value",
    [
        ("normal_states", []),
        ("abnormal_states", []),
        ("templates", []),
        ("templates", ["a photo of a {state}"]),
        ("templates", ["{} {} {}"]),
    ],
)
def test_invalid_ensembles(field, value):
    """Test that empty lists and malformed templates are rejected."""
    fields = {
        "normal_states": ["good"],
        "abnormal_states": ["bad"],
        "templates": ["a {} {}"],
        "object_name": "x",
    }
    fields[field] = value
    with pytest.raises(ValidationError):
        PromptEnsemble(**fields)


def test_render_prompts_empty_list_is_precondition_error():
    """Test the guard for ensembles built without validation."""
    ensemble = PromptEnsemble.model_construct(
        normal_states=[], abnormal_states=["bad"], templates=["a {state} {object}"], object_name="x"
    )
    with pytest.raises(PreconditionError):
        render_prompts(ensemble)


def test_encode_text_features_single_sentence():
    """Test that one sentence per class gives its normalized embedding."""
    encoder = RecordingTextEncoder()
    features = encode_text_features(["n"], ["a"], encoder)
    assert features.shape == (2, 8)
    for row, sentence in zip(features, ["n", "a"]):
        vector = encoder.vectors[sentence]
        np.testing.assert_allclose(row, vector / np.linalg.norm(vector), atol=1e-6)


def test_encode_text_features_duplicates_are_idempotent():
    """Test that repeating a sentence does not change its row."""
    encoder = RecordingTextEncoder()
    single = encode_text_features(["n"], ["a"], encoder)
    repeated = encode_text_features(["n", "n", "n"], ["a", "a"], encoder)
    np.testing.assert_allclose(single, repeated, atol=1e-6)


def test_encode_text_features_orthogonal_mean():
    """Test the renormalized mean of two orthogonal embeddings."""
    vectors = {"e1": np.array([2.0, 0.0, 0.0]), "e2": np.array([0.0, 5.0, 0.0]), "a": np.array([0.0, 0.0, 1.0])}
    features = encode_text_features(["e1", "e2"], ["a"], lambda s: np.stack([vectors[x] for x in s]))
    np.testing.assert_allclose(features[0], [2 ** -0.5, 2 ** -0.5, 0.0], atol=1e-6)
    np.testing.assert_allclose(features[1], [0.0, 0.0, 1.0], atol=1e-6)


def test_encode_text_features_unit_rows_and_permutation(rng):
    """Test unit-norm rows and invariance to sentence order."""
    encoder = RecordingTextEncoder(width=16)
    normal = [f"n{i}" for i in range(7)]
    abnormal = [f"a{i}" for i in range(5)]
    features = encode_text_features(normal, abnormal, encoder)
    np.testing.assert_allclose(np.linalg.norm(features, axis=1), 1.0, atol=1e-5)
    shuffled = encode_text_features(list(rng.permutation(normal)), list(rng.permutation(abnormal)), encoder)
    np.testing.assert_allclose(features, shuffled, atol=1e-6)


def test_encode_text_features_requires_sentences():
    """Test that empty sentence lists are rejected."""
    with pytest.raises(PreconditionError):
        encode_text_features([], ["a"], RecordingTextEncoder())


def test_default_template_set():
    """Test the shipped template asset."""
    templates = default_template_set()
    assert 0 < len(templates) < 85
    assert not any("weird" in t for t in templates)
    assert all("{state} {object}" in t for t in templates)
    assert default_template_set() == templates


def test_shipped_states():
    """Test the shipped state assets."""
    ensemble = load_prompt_ensemble("bottle")
    assert "flawless" in ensemble.normal_states
    assert "damaged" in ensemble.abnormal_states
    normal, abnormal = render_prompts(ensemble)
    assert len(normal) == len(ensemble.normal_states) * len(ensemble.templates)
    assert len(abnormal) == len(ensemble.abnormal_states) * len(ensemble.templates)


def test_prompt_asset_overrides(tmp_path):
    """Test loading state and template lists from files."""
    (tmp_path / "t.txt").write_text("# comment\na close-up of a {} {}\n\n", encoding="utf-8")
    (tmp_path / "n.txt").write_text("pristine\n", encoding="utf-8")
    (tmp_path / "a.txt").write_text("cracked\n", encoding="utf-8")
    ensemble = load_prompt_ensemble("tile", tmp_path / "t.txt", tmp_path / "n.txt", tmp_path / "a.txt")
    assert render_prompts(ensemble) == (["a close-up of a pristine tile"], ["a close-up of a cracked tile"])


def test_prompt_asset_errors(tmp_path):
    """Test that unreadable or invalid assets are configuration errors."""
    with pytest.raises(ConfigError):
        load_prompt_ensemble("tile", tmp_path / "absent.txt")
    (tmp_path / "bad.txt").write_text("no slots here\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_prompt_ensemble("tile", tmp_path / "bad.txt")


@pytest.mark.parametrize(
    "category,expected",
    [("metal_nut", "metal nut"), ("pcb1", "pcb"), ("bottle", "bottle"), ("pipe_fryum", "pipe fryum")],
)
def test_object_name_for(category, expected):
    """Test the conversion of category names into object names."""
    assert object_name_for(category) == expected


def test_build_text_features_with_backbone(synthetic_backbone):
    """Test text features from the synthetic text tower."""
    prompts = PromptConfig()
    features = build_text_features("bottle", synthetic_backbone, prompts)
    assert features.shape == (2, synthetic_backbone.spec.joint_width)
    np.testing.assert_allclose(np.linalg.norm(features, axis=1), 1.0, atol=1e-5)
    np.testing.assert_array_equal(features, build_text_features("bottle", synthetic_backbone, prompts))
    assert not np.allclose(features, build_text_features("screw", synthetic_backbone, prompts))
