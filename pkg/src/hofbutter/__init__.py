"""Hofstadter spectra, gap Chern numbers and colored butterflies on the
triangular lattice, with the square/rectangular model as the t3 = 0 limit."""

__version__ = "0.1.0"

from .magnetic_algebra import (
    BlochMomentum,
    Flux,
    HofstadterModel,
    build_hamiltonian,
    clock_shift,
    hamiltonian_derivatives,
    inversion_check,
    magnetic_symmetry_residual,
    modular_inverse,
)
from .spectrum import (
    BandOverlapError,
    BandSpectrum,
    ChambersData,
    ChambersMismatch,
    GapRecord,
    band_edge_kpoints,
    chambers_polynomial,
    compute_bands,
    compute_bands_dense,
    compute_gaps,
    det_closed_form,
    gaps_to_csv,
    spectrum_to_json,
)
from .chern import (
    ChernResult,
    CurvatureField,
    GapClosed,
    GridDegeneracy,
    QuantizationFailure,
    TransportResult,
    band_chern_fhs,
    band_chern_transport,
    berry_curvature,
    chern_bound,
    curvature_field,
    gap_chern,
    gap_chern_table,
    gap_residue_transport,
)
from .diophantine import (
    FragmentationReport,
    ResidueClass,
    StredaOutcome,
    Window,
    chain_assign,
    fragmentation_report,
    resolve_in_window,
    solve_residue,
    square_window,
    streda_check,
    triangular_window,
)
from .butterfly import (
    PHI_D_SYMMETRIC,
    ButterflyConfig,
    ButterflyDiagram,
    build_diagram,
    detect_coloring_errors,
    enumerate_fluxes,
    iter_flux_results,
    read_records_jsonl,
    sweep_to_jsonl,
    write_records_jsonl,
)
from .render import chern_color, render, render_jsonl, write_ppm
