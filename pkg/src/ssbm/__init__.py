"""Signed stochastic block model learning."""

__version__ = "0.1.0"

from .errors import (ConfigError, ConflictingSign, DegenerateModel,  # noqa: E402
                     EmptyInput, InfeasibleConfig, MalformedLine, SsbmError)
from .evaluation import confusion, k_recovery, nmi  # noqa: E402
from .graph import (Partition, SignedGraph, load_edge_list,  # noqa: E402
                    load_partition, write_edge_list, write_partition)
from .learner import FitConfig, FitResult, ModelParams, cost, fit  # noqa: E402
from .synth import (BlockPairConfig, SgConfig, generate_block_pair,  # noqa: E402
                    generate_sg, network_vi_config)

__all__ = [
    "ConfigError", "ConflictingSign", "DegenerateModel", "EmptyInput",
    "InfeasibleConfig", "MalformedLine", "SsbmError",
    "confusion", "k_recovery", "nmi",
    "Partition", "SignedGraph", "load_edge_list", "load_partition",
    "write_edge_list", "write_partition",
    "FitConfig", "FitResult", "ModelParams", "cost", "fit",
    "BlockPairConfig", "SgConfig", "generate_block_pair", "generate_sg",
    "network_vi_config",
]
