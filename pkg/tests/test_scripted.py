from __future__ import annotations

import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vate.dialogue import (
    OPENING_MARKER,
    REGENERATE_MARKER,
    SECTION_ANALYSIS,
    SECTION_CONVERSATION,
    SECTION_MESSAGE,
)
from vate.draft import assemble_quality_prompt
from vate.gateway import CompletionRequest
from vate.model import DraftImage
from vate.scripted import (
    NEAT_DRAFT,
    SCRIBBLE_DRAFT,
    SLIP_CARRY,
    SLIP_FORGOT_ADDITION,
    SLIP_PRECEDENCE,
    SLIP_UNKNOWN,
    ScriptedBackend,
    classify_slip,
    draft_bytes_for_quality,
    parse_product_plus_constant,
    quality_level,
    scripted_diagnose,
    scripted_overall_quality,
)

STATEMENT = "Compute 23 × 26 + 89."


def dialogue_prompt(message, conversation="(no turns yet)", analysis="", regen=False):
    parts = [
        "Constraints: stay on topic.",
        "",
        "## Problem",
        STATEMENT,
        "",
        SECTION_ANALYSIS,
        analysis or "[unknown] placeholder cause",
        "",
        SECTION_CONVERSATION,
        conversation,
        "",
        SECTION_MESSAGE,
        message,
    ]
    if regen:
        parts += ["", f"{REGENERATE_MARKER} The previous reply revealed the answer."]
    return "\n".join(parts) + "\n"


def complete_dialogue(backend, prompt):
    return backend.complete(
        CompletionRequest(prompt=prompt, request_tag="dialogue")
    ).text


class TestParsing:
    @pytest.mark.parametrize("glyph", ["×", "x", "*"])
    def test_multiplication_glyphs(self, glyph):
        assert parse_product_plus_constant(f"23 {glyph} 26 + 89") == (23, 26, 89)

    def test_non_matching_statement(self):
        assert parse_product_plus_constant("Solve 4 + 4.") is None


class TestClassifySlip:
    def test_forgot_final_addition(self):
        assert classify_slip(23, 26, 89, "598") == SLIP_FORGOT_ADDITION

    def test_precedence(self):
        assert classify_slip(23, 26, 89, "2645") == SLIP_PRECEDENCE

    @pytest.mark.parametrize("wrong", ["787", "587", "1687"])
    def test_carry_offsets(self, wrong):
        assert classify_slip(23, 26, 89, wrong) == SLIP_CARRY

    @pytest.mark.parametrize("wrong", ["999", "687", "no idea", "690"])
    def test_unknown(self, wrong):
        assert classify_slip(23, 26, 89, wrong) == SLIP_UNKNOWN


class TestDiagnose:
    def test_forgot_addition_wording(self):
        cause, suggestion = scripted_diagnose(STATEMENT, "598")
        assert cause.startswith(f"[{SLIP_FORGOT_ADDITION}]")
        assert "598" in cause
        assert suggestion == (
            "Don't forget to add after completing the multiplication."
        )

    def test_unparseable_statement_falls_back(self):
        cause, _ = scripted_diagnose("Integrate x^2.", "7")
        assert cause.startswith(f"[{SLIP_UNKNOWN}]")


class TestQualityDigest:
    def test_reference_payload_levels(self):
        assert quality_level(NEAT_DRAFT) == 4
        assert quality_level(SCRIBBLE_DRAFT) == 1
        assert scripted_overall_quality(NEAT_DRAFT) == pytest.approx(0.8)
        assert scripted_overall_quality(SCRIBBLE_DRAFT) == pytest.approx(0.2)

    @given(st.binary(min_size=1, max_size=64))
    def test_level_matches_digest_rule(self, data):
        assert quality_level(data) == hashlib.sha256(data).digest()[0] % 6

    def test_manufactured_payloads(self):
        passing = draft_bytes_for_quality(passing=True)
        failing = draft_bytes_for_quality(passing=False)
        assert quality_level(passing) >= 3
        assert quality_level(failing) < 3
        assert len(passing) >= 120 and len(failing) >= 120
        assert passing == draft_bytes_for_quality(passing=True)


class TestScriptedBackend:
    def setup_method(self):
        self.backend = ScriptedBackend()
        self.image = DraftImage(data=NEAT_DRAFT)

    def test_draft_summary_mentions_product(self):
        prompt = f"## Task\nSummarize.\n\n## Problem\n{STATEMENT}\n"
        response = self.backend.complete(
            CompletionRequest(
                prompt=prompt, request_tag="draft-analysis", image=self.image
            )
        )
        assert response.text.startswith("SUMMARY:")
        assert "598" in response.text
        assert "STEP:" in response.text

    def test_draft_analysis_requires_image(self):
        with pytest.raises(ValueError):
            self.backend.complete(
                CompletionRequest(prompt="## Problem\nX\n", request_tag="draft-analysis")
            )

    def test_quality_scores_track_payload(self):
        response = self.backend.complete(
            CompletionRequest(
                prompt=assemble_quality_prompt(),
                request_tag="draft-analysis",
                image=self.image,
            )
        )
        assert response.text.startswith("SCORES:")
        assert "clarity=4" in response.text
        assert "neatness=4" in response.text

    def test_diagnosis_reply_format(self):
        prompt = (
            f"## Problem\n{STATEMENT}\n\n## Student incorrect answer\n598\n"
        )
        text = self.backend.complete(
            CompletionRequest(prompt=prompt, request_tag="error-analysis")
        ).text
        cause_line, suggestion_line = text.splitlines()
        assert cause_line.startswith(f"CAUSE: [{SLIP_FORGOT_ADDITION}]")
        assert suggestion_line.startswith("SUGGESTION: Don't forget to add")

    def test_opening_reply_references_cause_and_asks(self):
        text = complete_dialogue(
            self.backend,
            dialogue_prompt(OPENING_MARKER, analysis="[carry-error] Dropped a carry."),
        )
        assert "Dropped a carry." in text
        assert text.rstrip().endswith("?")

    def test_give_up_leaks_the_answer(self):
        text = complete_dialogue(self.backend, dialogue_prompt("ok I give up"))
        assert "687" in text

    def test_direct_ask_is_refused(self):
        text = complete_dialogue(self.backend, dialogue_prompt("what is the answer"))
        assert "687" not in text

    def test_off_topic_is_redirected(self):
        text = complete_dialogue(
            self.backend, dialogue_prompt("did you watch the movie last night?")
        )
        assert "stay focused" in text

    def test_hints_progress_with_tutor_turns(self):
        one_turn = "Tutor: opener\nStudent: hm"
        three_turns = (
            "Tutor: opener\nStudent: hm\nTutor: hint\nStudent: hm\nTutor: hint"
        )
        first = complete_dialogue(
            self.backend, dialogue_prompt("help", conversation=one_turn)
        )
        later = complete_dialogue(
            self.backend, dialogue_prompt("help", conversation=three_turns)
        )
        assert "23 times 26" in first
        assert first != later
        assert "slowly" in later

    def test_regenerate_produces_compliant_hint(self):
        text = complete_dialogue(
            self.backend, dialogue_prompt("ok I give up", regen=True)
        )
        assert "687" not in text
        assert "89" in text

    def test_regenerate_spoil_keeps_leaking(self):
        text = complete_dialogue(
            self.backend, dialogue_prompt("just spoil it", regen=True)
        )
        assert "687" in text

    def test_unknown_stage_rejected(self):
        with pytest.raises(ValueError):
            self.backend.complete(
                CompletionRequest(prompt="p", request_tag="draft-analysis-v2")
            )

    def test_token_accounting(self):
        response = self.backend.complete(
            CompletionRequest(prompt=dialogue_prompt("hello"), request_tag="dialogue")
        )
        assert response.input_tokens >= 1
        assert response.output_tokens == max(1, len(response.text) // 4)
        assert response.backend_name == "scripted"
