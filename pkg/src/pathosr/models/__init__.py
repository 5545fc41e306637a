from .specs import GeneratorSpec, CriticSpec, SpecError
from .generator import Generator, build_generator, generator_forward
from .critic import Critic, build_critic
from .relativistic import relativistic_prob

__all__ = [
    "GeneratorSpec", "CriticSpec", "SpecError",
    "Generator", "build_generator", "generator_forward",
    "Critic", "build_critic",
    "relativistic_prob",
]
