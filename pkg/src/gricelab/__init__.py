"""gricelab: pragmatic speaker models over finite world spaces, exact text
distributions, distributional entailment tests, and corpus experiments."""

__version__ = "0.1.0"

from .semantics import (  # noqa: F401
    Language,
    Text,
    Utterance,
    WorldSpace,
    entails,
    make_synthetic_language,
    strictly_entails,
    text_denotation,
    truth_probability,
)
from .speakers import (  # noqa: F401
    CostFunction,
    DynamicGriceanSpeaker,
    DynamicRsaListener,
    DynamicRsaSpeaker,
    FactorizedTruthfulSpeaker,
    NonredundantSpeaker,
    StaticRsaSpeaker,
    UniformTruthfulSpeaker,
    conditional_information,
)
from .marginal import enumerate_texts, text_log_prob, text_log_prob_given_world  # noqa: F401
from .estimate import (  # noqa: F401
    Corpus,
    FrequencyModel,
    NgramModel,
    chebyshev_log_bound,
    corpus_stats,
    hoeffding_bound,
    sample_complexity_curve,
    sample_corpus,
)
