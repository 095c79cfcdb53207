"""Formality-sensitive machine translation data tooling.

Subpackages cover the full non-neural pipeline: annotated parallel corpus
ingestion (`fsmt.corpus`), morpheme-boundary-respecting BPE subword models
(`fsmt.tokenizer`), a rule-based formality classifier (`fsmt.formality`),
seeded few-shot prompt construction (`fsmt.prompts`), a chat-completion
client with a deterministic file-backed mock (`fsmt.llm`), the synthetic
generation/filter pipeline (`fsmt.pipeline`), and BLEU / %M-Acc / %C-F
evaluation with report rendering (`fsmt.evaluate`). The `fsmt` console
script wires these together.
"""

from fsmt.errors import FsmtError

__all__ = ["FsmtError"]
__version__ = "0.1.0"
