from .complexity import count_macs, count_params
from .engine import Model, forward
from .spec import LayerSpec, NetworkSpec, OutputContract, builtin_config, load_network, parse_network
from .weights import WeightFile, random_weights, validate_weights

__all__ = ["LayerSpec", "Model", "NetworkSpec", "OutputContract", "WeightFile", "builtin_config",
           "count_macs", "count_params", "forward", "load_network", "parse_network", "random_weights",
           "validate_weights"]
