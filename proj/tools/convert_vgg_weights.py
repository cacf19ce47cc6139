# Copyright (c) 2026 Deflicker Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Convert torchvision VGG19 weights to the DFWT0001 format read by
ConvFeatureNet::from_weight_file.

Offline helper — requires torch (and torchvision when downloading). Not run
in CI; the test suite uses the fixed_random feature net instead.

Usage:
  python tools/convert_vgg_weights.py --out vgg19_features.dfwt [--state-dict vgg19.pth]

Without --state-dict the pretrained weights are fetched via torchvision.
"""

import argparse
import struct
import sys

# Layer name -> index of the conv inside torchvision vgg19().features.
VGG19_FEATURE_INDEX = {
    "conv1_1": 0, "conv1_2": 2,
    "conv2_1": 5, "conv2_2": 7,
    "conv3_1": 10, "conv3_2": 12, "conv3_3": 14, "conv3_4": 16,
    "conv4_1": 19, "conv4_2": 21, "conv4_3": 23,
}


def load_state_dict(path):
    import torch

    if path:
        sd = torch.load(path, map_location="cpu", weights_only=True)
        if hasattr(sd, "state_dict"):
            sd = sd.state_dict()
        return sd
    from torchvision.models import VGG19_Weights, vgg19

    return vgg19(weights=VGG19_Weights.IMAGENET1K_V1).state_dict()


def write_entry(f, name, array):
    data = array.detach().cpu().contiguous().float()
    name_bytes = name.encode("utf-8")
    f.write(struct.pack("<I", len(name_bytes)))
    f.write(name_bytes)
    dims = list(data.shape)
    f.write(struct.pack("<I", len(dims)))
    for d in dims:
        f.write(struct.pack("<I", d))
    f.write(data.numpy().tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output .dfwt path")
    parser.add_argument("--state-dict", default="", help="optional vgg19 .pth state dict")
    args = parser.parse_args()

    sd = load_state_dict(args.state_dict)
    entries = []
    for name, idx in sorted(VGG19_FEATURE_INDEX.items()):
        for kind in ("weight", "bias"):
            key = f"features.{idx}.{kind}"
            if key not in sd:
                sys.exit(f"state dict is missing {key} (is this VGG19?)")
            entries.append((f"{name}.{kind}", sd[key]))

    with open(args.out, "wb") as f:
        f.write(b"DFWT0001")
        f.write(struct.pack("<I", len(entries)))
        for name, array in entries:
            write_entry(f, name, array)
    print(f"wrote {len(entries)} arrays to {args.out}")


if __name__ == "__main__":
    main()
