"""Binary PGM dumps of hidden-HC footprints and minicolumn weight maps."""

import os

import numpy as np

from .errors import BCPNNError


def pgm_bytes(image):
    image = np.asarray(image, dtype=np.uint8)
    rows, cols = image.shape
    return f"P5 {cols} {rows} 255\n".encode("ascii") + image.tobytes()


def write_pgm(path, image):
    with open(path, "wb") as f:
        f.write(pgm_bytes(image))


def read_pgm(path):
    with open(path, "rb") as f:
        raw = f.read()
    magic, cols, rows, maxval, pixels = raw.split(maxsplit=4)
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(int(rows), int(cols))


def footprint(mask_column, shape=(28, 28)):
    """0 (dark) where the pixel is connected, 255 elsewhere."""
    return np.where(mask_column, 0, 255).astype(np.uint8).reshape(shape)


def weight_map(weights_on, mask_column, shape=(28, 28)):
    """Linear rescale of the on-unit weights to 0..255 over connected pixels.

    Unconnected pixels are written as 0.
    """
    img = np.zeros(weights_on.shape, dtype=np.uint8)
    if mask_column.any():
        w = weights_on[mask_column]
        lo, hi = w.min(), w.max()
        scaled = np.zeros_like(w) if hi == lo else (w - lo) / (hi - lo)
        img[mask_column] = np.rint(scaled * 255.0).astype(np.uint8)
    return img.reshape(shape)


def dump_receptive_fields(model, out_dir, n_hcs=None, n_mcs=9, rng=None,
                          shape=(28, 28)):
    """Write footprints for every hidden HC and weight maps for sampled MCs.

    Files: ``hc{j}_mask.pgm`` (current mask), ``hc{j}_mask_init.pgm``
    (mask at initialization) and ``hc{j}_mc{b}.pgm``.  Weight maps are drawn
    for ``n_hcs`` randomly chosen HCs (all if None), ``n_mcs`` MCs each.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise BCPNNError(f"cannot create {out_dir}: {exc}") from None
    if not os.access(out_dir, os.W_OK):
        raise BCPNNError(f"{out_dir} is not writable")
    rng = rng if rng is not None else np.random.default_rng(0)
    proj, hid = model.projection, model.hidden_layer
    mask, init = proj.mask, model.initial_mask
    written = []
    for j in range(hid.n_hc):
        for name, m in ((f"hc{j}_mask.pgm", mask[:, j]), (f"hc{j}_mask_init.pgm", init[:, j])):
            path = os.path.join(out_dir, name)
            write_pgm(path, footprint(m, shape))
            written.append(path)
    hcs = np.arange(hid.n_hc)
    if n_hcs is not None and n_hcs < hid.n_hc:
        hcs = np.sort(rng.choice(hid.n_hc, size=n_hcs, replace=False))
    # rows for the "on" minicolumn of each input HC
    w_on = proj.weights[0::proj.src.mc_per_hc]
    for j in hcs:
        mcs = np.arange(hid.mc_per_hc)
        if n_mcs < hid.mc_per_hc:
            mcs = np.sort(rng.choice(hid.mc_per_hc, size=n_mcs, replace=False))
        for b in mcs:
            path = os.path.join(out_dir, f"hc{j}_mc{b}.pgm")
            write_pgm(path, weight_map(w_on[:, j * hid.mc_per_hc + b], mask[:, j], shape))
            written.append(path)
    return written
