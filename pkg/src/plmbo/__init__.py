"""PL-MBO: graph MBO classification over a family of thresholded
persistent Laplacians, plus simplicial persistent-Laplacian spectra."""

from .ensemble import accuracy, concatenate_outputs, forest_fit, forest_predict, split_by_mask
from .family import LaplacianFamily, build_family, offdiag_range, persistent_laplacian
from .graph import Dataset, SimilarityGraph, build_graph, gaussian_weights, knn_graph, symmetric_laplacian
from .linalg import EigenBasis, EigenSolverError, SparseSymMatrix, dense_eig, matvec, nullity, smallest_eigenpairs
from .mbo import (FidelitySpec, MboConfig, diffusion_step, displacement, gl_energy, initialize_state, mbo_run,
                  project_to_simplex)
from .pipeline import RunConfig, run_classify

__version__ = "0.1.0"
