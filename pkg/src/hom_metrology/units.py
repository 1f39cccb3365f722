"""Time and length unit conversions.

Attoseconds are the external time unit everywhere; picoseconds are used for
the dip width and inside the Fisher-information formulas (so Fisher values
come out in ps^-2).
"""

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0
AS_PER_PS = 1e6
AS_PER_FS = 1e3

#: attoseconds of optical delay per nanometre of path, ~3.33564
AS_PER_NM = 1e-9 / SPEED_OF_LIGHT_M_PER_S * 1e18


def fs_to_as(t_fs):
    return t_fs * AS_PER_FS


def as_to_fs(t_as):
    return t_as / AS_PER_FS


def ps_to_as(t_ps):
    return t_ps * AS_PER_PS


def as_to_ps(t_as):
    return t_as / AS_PER_PS


def nm_to_as(path_nm, refractive_index=1.0):
    """Delay for an optical path change of ``path_nm``.

    ``refractive_index`` follows the table convention ``c * dtau / n``: the
    path in nm is the physical length times ``n``.
    """
    return path_nm * refractive_index * AS_PER_NM


def as_to_nm(t_as, refractive_index=1.0):
    return t_as / AS_PER_NM / refractive_index
