import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent, reproducible seed from a base seed and integer keys.

    Args:
        seed: Experiment seed.
        keys: e.g. episode and pass indices.

    Returns:
        A 32-bit seed that only depends on its arguments.
    """
    sequence = np.random.SeedSequence([seed, *keys])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
