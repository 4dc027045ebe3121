"""Independent numpy re-implementation of the loss-network forward pass.

Used by the loss tests as a second route: feature maps, Gram matrices,
and the weighted total are all recomputed here from the same weights,
without touching torch ops. Convolution is im2col + matmul in float64.
"""

import numpy as np

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float64)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float64)

# Activation name -> index in the sequential stack (conv, relu, ..., pool).
LAYER_INDEX = {
    "relu1_1": 1, "relu1_2": 3,
    "relu2_1": 6, "relu2_2": 8,
    "relu3_1": 11, "relu3_2": 13, "relu3_3": 15,
    "relu4_1": 18, "relu4_2": 20, "relu4_3": 22,
}
CFG = (64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M")


def conv3x3(x, weight, bias):
    """Zero-padded 3x3 convolution. x: (C_in, H, W); weight: (C_out, C_in, 3, 3)."""
    c_in, h, w = x.shape
    c_out = weight.shape[0]
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = np.empty((c_in * 9, h * w), dtype=np.float64)
    k = 0
    for dy in range(3):
        for dx in range(3):
            cols[k * c_in : (k + 1) * c_in] = padded[:, dy : dy + h, dx : dx + w].reshape(c_in, -1)
            k += 1
    # Rearrange weight to match the (dy, dx, c_in) column order above.
    wmat = weight.transpose(2, 3, 1, 0).reshape(c_in * 9, c_out)
    out = wmat.T @ cols + bias[:, None]
    return out.reshape(c_out, h, w)


def maxpool2(x):
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def features_by_name(image, state, names):
    """image: (3, H, W) float in [0, 1]; state: features state dict as numpy."""
    x = (image.astype(np.float64) - IMAGENET_MEAN[:, None, None]) / IMAGENET_STD[:, None, None]
    wanted = {LAYER_INDEX[n]: n for n in names}
    out = {}
    idx = 0
    for item in CFG:
        if item == "M":
            x = maxpool2(x)
            if idx in wanted:
                out[wanted[idx]] = x.copy()
            idx += 1
        else:
            x = conv3x3(x, state[f"{idx}.weight"], state[f"{idx}.bias"])
            idx += 1
            x = np.maximum(x, 0.0)
            if idx in wanted:
                out[wanted[idx]] = x.copy()
            idx += 1
        if len(out) == len(wanted):
            break
    return out


def gram_np(f):
    c, h, w = f.shape
    psi = f.reshape(c, h * w)
    return (psi @ psi.T) / (c * h * w)


def total_perceptual_loss(output, content, style, state, *, content_weight,
                          style_weight, tv_weight, content_layers, style_layers):
    """Weighted content + style + TV total, all in float64 numpy."""
    all_layers = list(dict.fromkeys([*content_layers, *style_layers]))
    out_f = features_by_name(output, state, all_layers)
    content_f = features_by_name(content, state, content_layers)
    style_f = features_by_name(style, state, style_layers)

    content_term = 0.0
    for name in content_layers:
        a, b = out_f[name], content_f[name]
        c, h, w = a.shape
        content_term += float(((a - b) ** 2).sum()) / (c * h * w)

    style_term = 0.0
    for name in style_layers:
        g_out = gram_np(out_f[name])
        g_style = gram_np(style_f[name])
        style_term += float(((g_out - g_style) ** 2).sum())

    dh = ((output[:, :, 1:] - output[:, :, :-1]) ** 2).sum()
    dv = ((output[:, 1:, :] - output[:, :-1, :]) ** 2).sum()
    tv_term = float(dh + dv)

    return content_weight * content_term + style_weight * style_term + tv_weight * tv_term


def state_to_numpy(features_module):
    """Extract a torch features Sequential's weights as float64 numpy arrays."""
    return {k: v.detach().numpy().astype(np.float64) for k, v in features_module.state_dict().items()}
