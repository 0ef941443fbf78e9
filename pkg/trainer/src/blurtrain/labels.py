"""Label scaling between native blur parameters and the [0, 1] training range.

These are the affine maps documented by the dataset manifest format:
``r_norm = (r - 1) / 99`` for lengths in [1, 100] and
``phi_norm = (phi + 89) / 179`` for angles in (-90, 90].  The model is
trained on the normalized values; predictions are re-scaled to the native
ranges before they are written out.
"""

R_SPAN = 99.0
R_OFFSET = 1.0
PHI_SPAN = 179.0
PHI_OFFSET = -89.0


def to_native(r_norm: float, phi_norm: float) -> tuple[float, float]:
    return R_OFFSET + R_SPAN * r_norm, PHI_OFFSET + PHI_SPAN * phi_norm


def to_normalized(r: float, phi: float) -> tuple[float, float]:
    return (r - R_OFFSET) / R_SPAN, (phi - PHI_OFFSET) / PHI_SPAN
