"""Layered-Alamouti space-time block codes with PIC group decoding.

Library layout:

* ``linalg``: dense complex kernel (pinv, projectors, numerical rank).
* ``constellation``: QAM/BPSK constellations, Gray bit maps, difference sets.
* ``rotation``: signal-space diversity rotations (Givens, cyclotomic).
* ``stbc``: code construction, rate, power normalization, groupings.
* ``equiv_channel``: equivalent linear channel and receive preprocessing.
* ``detectors``: ML / ZF / MMSE / BLAST / PIC / PIC-SIC receivers.
* ``diversity``: numeric certification of the full-diversity criteria.
* ``sim``: seeded Monte Carlo BER engine over Rayleigh block fading.
* ``config`` / ``cli`` / ``plot``: command-line front end.
"""

from .constellation import Constellation, by_name, difference_set, demap, make_qam, modulate
from .rotation import RotationMatrix, cyclotomic, default_rotation, givens, min_product_component
from .stbc import (
    CodeSpec,
    GroupingScheme,
    default_grouping,
    encode,
    interleaved_grouping,
    nominal_rate,
    normalization_mu,
    rate,
)
from .equiv_channel import EquivalentChannel, build_probe, build_structured, group_columns, preprocess_rx
from .detectors import (
    DetectorConfig,
    blast_decode,
    complexity_estimate,
    ml_decode,
    mmse_decode,
    pic_group_decode,
    pic_sic_decode,
    zf_decode,
)
from .diversity import (
    CertReport,
    det_product_oracle,
    diversity_slope,
    pic_criterion_check,
    pic_sic_criterion_check,
    rank_criterion_check,
)
from .sim import BerPoint, SimConfig, draw_channel, run_point, sweep

__version__ = "0.1.0"
