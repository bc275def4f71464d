"""Fully convolutional mesh autoencoder.

Thin python surface over the C++ core: build a sampling hierarchy over a
mesh graph, assemble a convolutional autoencoder on it, train, and move
meshes through the latent space.
"""

from ._core import (
    ConfigError,
    Hierarchy,
    InputError,
    Latent,
    Model,
    ParseError,
    Topology,
    __version__,
    build_hierarchy,
    build_model,
    interpolate,
    load_hierarchy,
    load_latent,
    load_mesh,
    load_model,
    make_grid,
    make_icosphere,
    mix,
    save_obj,
    synthesize,
)

__all__ = [
    "ConfigError",
    "Hierarchy",
    "InputError",
    "Latent",
    "Model",
    "ParseError",
    "Topology",
    "__version__",
    "build_hierarchy",
    "build_model",
    "interpolate",
    "load_hierarchy",
    "load_latent",
    "load_mesh",
    "load_model",
    "make_grid",
    "make_icosphere",
    "mix",
    "save_obj",
    "synthesize",
]
