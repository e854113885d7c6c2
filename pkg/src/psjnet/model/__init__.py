"""The two network variants, their parameters and the sequence containers."""

from .checkpoint import Checkpoint, load, save
from .network import (
    batch_loss,
    decode_scores,
    encode_sequence,
    forward,
    gru_step,
    nll,
    psj1_step,
    psj1_transfer,
    psj2_join,
    psj2_role_transfer,
    psj2_split_step,
    score_batch,
    sequence_loss,
    target_probabilities,
    transfer,
)
from .params import ModelConfig, param_shapes
from .sequence import DOMAINS, Batch, MixedSequence, Vocabulary, decode, encode, make_batch
