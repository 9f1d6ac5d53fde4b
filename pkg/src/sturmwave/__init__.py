"""Sturmian quasiperiodic waveguides: words, transfer matrices and bulk spectra."""
from .numbers import (ContinuedFraction, ConvergentSequence, best_rational_approx, cf_from_rational,
                      convergents, parse_rational, rational_from_cf)
from .words import (SturmianWord, assign_parameters, block_history, cutting_sequence_oracle,
                    g_vectors, sturmian_block, word_for)
from .tmm import (PalindromyError, cheb_z_closed, cheb_z_iterate, cos_kL_2x2, cos_kL_4x4,
                  supercell_tm, supercell_tm_direct)
from .models import ModelSpec, ModelSpecError, chain_spec, rod_spec, BEAM_CASES
from .spectrum import BandList, BulkGrid, SelfSimReport, bulk_spectrum, passbands, selfsim_sequence

__version__ = "0.1.0"

__all__ = [
    "ContinuedFraction", "ConvergentSequence", "best_rational_approx", "cf_from_rational",
    "convergents", "parse_rational", "rational_from_cf",
    "SturmianWord", "assign_parameters", "block_history", "cutting_sequence_oracle", "g_vectors",
    "sturmian_block", "word_for",
    "PalindromyError", "cheb_z_closed", "cheb_z_iterate", "cos_kL_2x2", "cos_kL_4x4",
    "supercell_tm", "supercell_tm_direct",
    "ModelSpec", "ModelSpecError", "chain_spec", "rod_spec", "BEAM_CASES",
    "BandList", "BulkGrid", "SelfSimReport", "bulk_spectrum", "passbands", "selfsim_sequence",
]
