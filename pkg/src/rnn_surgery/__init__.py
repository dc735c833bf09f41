"""Exact surgery on ReLU recurrent networks: conversions to and from
feedforward nets, weight-level combinators, a past-dependent sequence
approximator and a nonparametric regression harness."""

from .networks import (
    DimensionError,
    FeedforwardNet,
    ModifiedRecurrentNet,
    RecurrentLayer,
    RecurrentNet,
    eval_fnn,
    eval_mrnn,
    eval_rnn,
    hidden_states,
    vec,
)
from .bounds import LayerBounds, bound_propagate
from .serialization import NetworkFormatError, load_network, save_network
from .combinators import compose, concat, identity_rnn, lincomb, pad, tokenwise_rnn
from .conversion import (
    BinomialSystem,
    binom_inverse,
    binom_matrix,
    fnn_to_mrnn,
    fnn_to_rnn,
    mrnn_to_rnn,
    rnn_to_fnn,
)

__version__ = "0.1.0"
