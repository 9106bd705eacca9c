"""Records, champions and D-norms of multivariate i.i.d. observations"""

from .dnorm import dual_eval, margin_model, norm_eval, sample_generator, sample_generators
from .models import (
    ChampionTieError, CopulaFamily, CopulaModel, DataFormatError, DependenceModel, DescriptorError,
    DimensionError, Estimate, EstimationError, Family, ModelError, RecmaxError, RecordSummary,
    parse_copula, parse_model,
)
from .records import RecordScanState, champion_index, pit_transform, scan
from .samplers import sample_copula, sample_copulas, sample_eta, sample_etas

__version__ = "0.1.0"
