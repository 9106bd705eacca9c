"""Domain types: dependence models, copulas, results and errors"""

from .copula import CopulaFamily, CopulaModel, parse_copula
from .dependence import DependenceModel, Family, parse_model
from .results import (
    ChampionTieError, DataFormatError, DescriptorError, DimensionError, Estimate,
    EstimationError, GeneratorSample, MaxStableSample, ModelError, RecmaxError, RecordSummary,
)
