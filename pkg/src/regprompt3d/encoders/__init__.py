from .model import DualEncoder, EncoderConfig, PatchSequence, class_logits, classify
from .store import load_encoder, save_encoder
from .text import TokenSequence, Vocabulary
