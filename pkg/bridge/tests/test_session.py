"""Session semantics: self-description, conditioning sides, trace recording."""

from __future__ import annotations

import json

import numpy as np
import pytest

from lmmbridge.model import PATCHES, load_model
from lmmbridge.session import DESCRIPTION_PROMPT, BridgeSession, SessionError
from lmmbridge.tracefile import render_trace

IMAGE = "session-test-image"
QUERY = "what is in the bowl"


@pytest.fixture(scope="module")
def model():
    return load_model("toy")


@pytest.fixture
def session(model):
    return BridgeSession(model)


class TestDescribe:
    def test_generates_a_nonempty_description(self, session):
        text = session.describe(IMAGE)
        assert text
        assert session.description
        assert session.image_ref == IMAGE
        assert session.image is not None

    def test_default_prompt_is_the_canonical_instruction(self, session):
        session.describe(IMAGE)
        assert session.prompt == DESCRIPTION_PROMPT
        assert session.prompt.startswith("Provide a detailed description")

    def test_deterministic(self, model):
        assert BridgeSession(model).describe(IMAGE) == BridgeSession(model).describe(IMAGE)

    def test_depends_on_the_image(self, model):
        assert BridgeSession(model).describe("img-a") != BridgeSession(model).describe("img-b")

    def test_prompt_steers_the_description(self, model):
        plain = BridgeSession(model).describe("sample-a")
        steered = BridgeSession(model).describe("sample-a", prompt="what color is it")
        assert plain != steered

    def test_constructor_prompt_override(self, model):
        by_arg = BridgeSession(model).describe("sample-a", prompt="what color is it")
        by_ctor = BridgeSession(model, description_prompt="what color is it").describe("sample-a")
        assert by_arg == by_ctor

    def test_length_cap(self, model):
        short = BridgeSession(model, max_description_tokens=3)
        short.describe(IMAGE)
        assert 1 <= len(short.description) <= 3

    def test_cap_must_be_positive(self, model):
        with pytest.raises(ValueError, match=">= 1"):
            BridgeSession(model, max_description_tokens=0)


class TestSides:
    def test_d_before_describe_is_a_session_error(self, session):
        with pytest.raises(SessionError) as exc:
            session.logits("d", [2, 3])
        assert exc.value.code == "description_not_generated"
        assert exc.value.message == "description not generated"

    def test_invalid_side(self, session):
        with pytest.raises(SessionError) as exc:
            session.logits("q", [])
        assert exc.value.code == "invalid_params"

    def test_out_of_range_context(self, session):
        with pytest.raises(SessionError) as exc:
            session.logits("v", [session.model.n + 7])
        assert exc.value.code == "invalid_params"

    def test_v_side_works_without_an_image(self, session):
        logits = session.logits("v", [2, 3])
        assert np.array_equal(logits, session.model.next_logits([2, 3]))

    def test_substitution_invariant(self, session):
        """After substitution the d-side input carries no image content:
        same positions, description ids where the patches were."""
        session.describe(IMAGE)
        ctx = session.model.tokenize(QUERY)
        v_ids = session.input_ids("v", ctx)
        d_ids = session.input_ids("d", ctx)
        assert v_ids == [session.model.image_id] * PATCHES + ctx
        assert d_ids == session.description + ctx
        assert session.model.image_id not in d_ids
        assert v_ids[PATCHES:] == d_ids[len(session.description):]

    def test_sides_score_differently(self, session):
        session.describe(IMAGE)
        ctx = session.model.tokenize(QUERY)
        assert not np.array_equal(session.logits("v", ctx), session.logits("d", ctx))

    def test_v_side_uses_real_patches(self, session):
        session.describe(IMAGE)
        slots = session.input_slots("v", [2])
        assert isinstance(slots[0], np.ndarray)
        assert slots[-1] == 2


class TestRecordSteps:
    def test_choices_are_visual_argmax(self, session):
        records, query_ids = session.record_steps(IMAGE, QUERY, steps=5)
        assert query_ids == session.model.tokenize(QUERY)
        assert 1 <= len(records) <= 5
        for t, rec in enumerate(records):
            assert rec["step"] == t
            assert len(rec["logits_v"]) == session.model.n
            assert len(rec["logits_d"]) == session.model.n
            assert rec["recorded_choice"] == int(np.argmax(rec["logits_v"]))

    def test_steps_are_recomputable(self, session):
        """Each recorded step is the session's own logits at that context."""
        records, query_ids = session.record_steps(IMAGE, QUERY, steps=4)
        context = list(query_ids)
        for rec in records:
            assert np.allclose(rec["logits_v"], session.logits("v", context), atol=0)
            assert np.allclose(rec["logits_d"], session.logits("d", context), atol=0)
            context.append(rec["recorded_choice"])

    def test_re_record_is_bit_identical(self, model):
        def render():
            session = BridgeSession(model)
            records, query_ids = session.record_steps(IMAGE, QUERY, steps=6)
            return render_trace(
                vocab=model.vocab,
                eos_id=model.eos_id,
                model=model.name,
                prompt=QUERY,
                steps=records,
                note="re-record check",
            )

        assert render() == render()

    def test_steps_must_be_positive(self, session):
        with pytest.raises(ValueError, match=">= 1"):
            session.record_steps(IMAGE, QUERY, steps=0)


class TestTraceRendering:
    def test_document_parses_with_the_documented_header(self, session):
        records, _ = session.record_steps(IMAGE, QUERY, steps=3)
        doc = json.loads(
            render_trace(
                vocab=session.model.vocab,
                eos_id=session.model.eos_id,
                model=session.model.name,
                prompt=QUERY,
                steps=records,
            )
        )
        header = doc["header"]
        assert list(header) == [
            "format_version", "n", "vocab", "eos_id", "model",
            "prompt", "k", "alpha", "beta", "note",
        ]
        assert header["format_version"] == 1
        assert header["n"] == session.model.n
        assert header["vocab"] == list(session.model.vocab)
        assert header["eos_id"] == session.model.eos_id
        assert len(doc["steps"]) == len(records)
        step = doc["steps"][0]
        assert list(step) == ["step", "logits_v", "logits_d", "recorded_choice"]

    def test_header_defaults(self, session):
        records, _ = session.record_steps(IMAGE, QUERY, steps=1)
        header = json.loads(
            render_trace(
                vocab=session.model.vocab,
                eos_id=session.model.eos_id,
                model="toy",
                prompt=QUERY,
                steps=records,
            )
        )["header"]
        assert header["k"] == 0.3
        assert header["alpha"] == 1.0
        assert header["beta"] == 0.1
