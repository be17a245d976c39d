"""Speculative decoding with a tolerance-relaxed acceptance rule, over tabular token models."""

from .bench import CostModel, Metrics, simulate_cost, sweep_beta, sweep_draft_len
from .models import (Corpus, RandomStream, SequenceModel, TabularMarkovModel, ar_decode,
                     cross_entropy, derive_draft, fit_tabular, load_model, read_corpus,
                     sample_token, save_model)
from .oracle import (analytic_acceptance_prob, exact_ar_distribution, exact_ssd_distribution,
                     step_emission_distribution, tv_distance)
from .ssd import (CycleTrace, DecodeResult, SsdConfig, accept_token, draft_generate,
                  residual_distribution, ssd_cycle, ssd_decode, target_verify)

__version__ = "0.1.0"

__all__ = [
    "CostModel", "Metrics", "simulate_cost", "sweep_beta", "sweep_draft_len",
    "Corpus", "RandomStream", "SequenceModel", "TabularMarkovModel", "ar_decode",
    "cross_entropy", "derive_draft", "fit_tabular", "load_model", "read_corpus",
    "sample_token", "save_model",
    "analytic_acceptance_prob", "exact_ar_distribution", "exact_ssd_distribution",
    "step_emission_distribution", "tv_distance",
    "CycleTrace", "DecodeResult", "SsdConfig", "accept_token", "draft_generate",
    "residual_distribution", "ssd_cycle", "ssd_decode", "target_verify",
]
