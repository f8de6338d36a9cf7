#!/usr/bin/env python3
"""Export the face detector and embedder to ONNX for the neural backend.

    python3 tools/export_models.py --out models/
        writes models/detector/{pnet,rnet,onet}.onnx and models/embedder.onnx
        (InceptionResnetV1, VGGFace2 weights; needs network access the first
        time facenet-pytorch downloads them).

    python3 tools/export_models.py --test-fixtures tests/fixtures/models
        regenerates the small fixtures used by the unit tests: the cascade
        networks, a tiny deterministic embedder, the astronaut photo and the
        reference values the C++ tests compare against.

Requires torch, onnx and facenet-pytorch.
"""

import argparse
import json
import os

import numpy as np
import onnx
import torch
from facenet_pytorch import InceptionResnetV1
from facenet_pytorch.models.mtcnn import ONet, PNet, RNet


def fold_permute(dense, channels, height, width):
    """Reorders a Linear layer's inputs from (W, H, C) flattening to (C, H, W).

    The reference networks transpose before flattening. Folding the transpose
    into the weights leaves a plain Conv -> Flatten -> Gemm graph that OpenCV's
    ONNX importer handles for any batch size.
    """
    idx = torch.arange(channels * height * width).reshape(width, height, channels)
    order = idx.permute(2, 1, 0).reshape(-1)
    folded = torch.nn.Linear(dense.in_features, dense.out_features)
    with torch.no_grad():
        folded.weight.copy_(dense.weight[:, order])
        folded.bias.copy_(dense.bias)
    return folded


def floor_pools(path):
    """Rewrites ceil_mode MaxPool nodes as explicit trailing padding.

    OpenCV's importer ignores ceil_mode. Padding the bottom/right edges by
    stride - 1 (pool padding counts as -inf) gives the same sizes and values.
    """
    model = onnx.load(path)
    for node in model.graph.node:
        if node.op_type != "MaxPool":
            continue
        attrs = {a.name: a for a in node.attribute}
        if "ceil_mode" not in attrs or attrs["ceil_mode"].i == 0:
            continue
        strides = list(attrs["strides"].ints)
        pads = list(attrs["pads"].ints) if "pads" in attrs else [0, 0, 0, 0]
        pads = pads[:2] + [pads[2] + strides[0] - 1, pads[3] + strides[1] - 1]
        for name in ("ceil_mode", "pads"):
            if name in attrs:
                node.attribute.remove(attrs[name])
        node.attribute.append(onnx.helper.make_attribute("pads", pads))
    onnx.save(model, path)


class FlatRNet(torch.nn.Module):
    def __init__(self, net):
        super().__init__()
        self.net = net
        self.dense4 = fold_permute(net.dense4, 64, 3, 3)

    def forward(self, x):
        n = self.net
        x = n.prelu1(n.conv1(x))
        x = n.pool1(x)
        x = n.pool2(n.prelu2(n.conv2(x)))
        x = n.prelu3(n.conv3(x))
        x = n.prelu4(self.dense4(torch.flatten(x, 1)))
        return n.dense5_2(x), n.softmax5_1(n.dense5_1(x))


class FlatONet(torch.nn.Module):
    def __init__(self, net):
        super().__init__()
        self.net = net
        self.dense5 = fold_permute(net.dense5, 128, 3, 3)

    def forward(self, x):
        n = self.net
        x = n.pool1(n.prelu1(n.conv1(x)))
        x = n.pool2(n.prelu2(n.conv2(x)))
        x = n.pool3(n.prelu3(n.conv3(x)))
        x = n.prelu4(n.conv4(x))
        x = n.prelu5(self.dense5(torch.flatten(x, 1)))
        return n.dense6_2(x), n.dense6_3(x), n.softmax6_1(n.dense6_1(x))


def export_cascade(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    nets = [
        ("pnet", PNet(pretrained=True).eval(), (1, 3, 48, 48), ["reg", "prob"],
         {"input": {0: "n", 2: "h", 3: "w"}}),
        ("rnet", FlatRNet(RNet(pretrained=True).eval()).eval(), (1, 3, 24, 24), ["reg", "prob"],
         {"input": {0: "n"}}),
        ("onet", FlatONet(ONet(pretrained=True).eval()).eval(), (1, 3, 48, 48), ["reg", "landmarks", "prob"],
         {"input": {0: "n"}}),
    ]
    for name, model, shape, outputs, dynamic in nets:
        path = os.path.join(out_dir, name + ".onnx")
        torch.onnx.export(model, torch.zeros(shape), path, input_names=["input"], output_names=outputs,
                          dynamic_axes=dynamic, opset_version=11, dynamo=False)
        floor_pools(path)


def export_embedder(path, model):
    torch.onnx.export(model.eval(), torch.zeros(1, 3, 160, 160), path, input_names=["input"],
                      output_names=["embedding"], opset_version=11, dynamo=False)


class TinyEmbedder(torch.nn.Module):
    """Stands in for the real embedder in tests: same input/output contract."""

    def __init__(self):
        super().__init__()
        self.conv = torch.nn.Conv2d(3, 8, kernel_size=5, stride=4)
        self.pool = torch.nn.AvgPool2d(kernel_size=9, stride=9)
        self.fc = torch.nn.Linear(8 * 4 * 4, 512)

    def forward(self, x):
        x = torch.relu(self.conv(x))
        x = self.pool(x)
        return self.fc(torch.flatten(x, 1))


def probe_tensor():
    # Matches probe_tensor() in tests/test_facepipe_neural.cpp.
    y, x, c = np.meshgrid(np.arange(160), np.arange(160), np.arange(3), indexing="ij")
    hwc = np.sin(0.05 * x + 0.09 * y + 1.3 * c).astype(np.float32)
    return torch.from_numpy(hwc.transpose(2, 0, 1)[None].copy())


def write_fixtures(out_dir):
    export_cascade(out_dir)

    torch.manual_seed(0)
    tiny = TinyEmbedder()
    export_embedder(os.path.join(out_dir, "tiny_embedder.onnx"), tiny)
    with torch.no_grad():
        v = tiny(probe_tensor())[0]
    v = v / v.norm()

    import skimage.data
    from PIL import Image
    from facenet_pytorch import MTCNN
    photo = Image.fromarray(skimage.data.astronaut())
    photo.save(os.path.join(out_dir, "..", "astronaut.jpg"), quality=90)
    decoded = Image.open(os.path.join(out_dir, "..", "astronaut.jpg")).convert("RGB")
    boxes, probs = MTCNN(keep_all=True).detect(decoded)

    reference = {
        "tiny_embedder_probe_head": [float(a) for a in v[:8]],
        "astronaut_boxes": [[float(a) for a in b] for b in boxes],
        "astronaut_probs": [float(p) for p in probs],
    }
    with open(os.path.join(out_dir, "reference.json"), "w") as f:
        json.dump(reference, f, indent=2)
        f.write("\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", help="directory for deployable models")
    ap.add_argument("--test-fixtures", help="directory for unit-test fixtures")
    args = ap.parse_args()
    if args.test_fixtures:
        write_fixtures(args.test_fixtures)
    if args.out:
        export_cascade(os.path.join(args.out, "detector"))
        export_embedder(os.path.join(args.out, "embedder.onnx"), InceptionResnetV1(pretrained="vggface2"))
    if not (args.out or args.test_fixtures):
        ap.error("nothing to do; pass --out and/or --test-fixtures")


if __name__ == "__main__":
    main()
