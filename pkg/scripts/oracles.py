"""Reference values from torch, frozen into tests/test_oracles.py.

Run with `python3 scripts/oracles.py`; torch is only needed here, not by the
package or the test suite.
"""
import numpy as np
import torch

from lexiphish.model import build_model

torch.set_default_dtype(torch.float64)
np.set_printoptions(precision=17, floatmode="unique")


def conv():
    x = np.arange(8, dtype=np.float64).reshape(1, 4, 2) / 7.0 - 0.3
    w = np.linspace(-1, 1, 12).reshape(3, 2, 2)
    b = np.array([0.25, -0.5])
    g = np.array([[[1.0, -2.0], [0.5, 3.0]]])
    xt = torch.tensor(x.transpose(0, 2, 1), requires_grad=True)
    wt = torch.tensor(w.transpose(2, 1, 0), requires_grad=True)
    bt = torch.tensor(b, requires_grad=True)
    out = torch.nn.functional.conv1d(xt, wt, bt)
    out.backward(torch.tensor(g.transpose(0, 2, 1)))
    print("conv out", out.detach().numpy().transpose(0, 2, 1).tolist())
    print("conv grad_x", xt.grad.numpy().transpose(0, 2, 1).tolist())
    print("conv grad_w", wt.grad.numpy().transpose(2, 1, 0).tolist())


def bn():
    x = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 0.25], [-1.0, 4.0, 2.0], [0.5, 1.0, -3.0]])
    gamma = np.array([1.5, 0.5, -1.0])
    beta = np.array([0.1, 0.2, 0.3])
    g = np.array([[0.3, -1.0, 2.0], [1.0, 0.5, -0.5], [-2.0, 0.25, 1.0], [0.7, 0.1, 0.0]])
    m = torch.nn.BatchNorm1d(3, eps=1e-5, momentum=0.1)
    m.weight.data = torch.tensor(gamma)
    m.bias.data = torch.tensor(beta)
    xt = torch.tensor(x, requires_grad=True)
    out = m(xt)
    out.backward(torch.tensor(g))
    print("bn out", out.detach().numpy().tolist())
    print("bn grad_x", xt.grad.numpy().tolist())
    print("bn grad_gamma", m.weight.grad.numpy().tolist(), "grad_beta", m.bias.grad.numpy().tolist())
    # torch tracks the unbiased variance; the biased one is what the engine stores
    print("bn moving_mean", m.running_mean.numpy().tolist(), "biased var update",
          (0.9 + 0.1 * x.var(axis=0)).tolist())


def adam():
    p = torch.tensor([0.5, -1.0, 2.0], requires_grad=True)
    opt = torch.optim.Adam([p], lr=1e-3, betas=(0.9, 0.999), eps=1e-8)
    for g in ([0.1, -0.2, 0.3], [1.0, 0.0, -1.0], [-0.5, 2.0, 0.05]):
        opt.zero_grad()
        p.grad = torch.tensor(g)
        opt.step()
    print("adam", p.detach().numpy().tolist())


def network():
    ck = build_model(7)
    arr = ck.model.arrays()
    net = torch.nn.Sequential(
        torch.nn.Conv1d(1, 32, 3), torch.nn.ReLU(), torch.nn.MaxPool1d(2),
        torch.nn.Conv1d(32, 64, 3), torch.nn.ReLU(), torch.nn.AdaptiveAvgPool1d(1), torch.nn.Flatten(),
        torch.nn.Linear(64, 64), torch.nn.BatchNorm1d(64, eps=1e-5), torch.nn.ReLU(), torch.nn.Linear(64, 1),
        torch.nn.Sigmoid(),
    )
    with torch.no_grad():
        net[0].weight.copy_(torch.tensor(arr["0.conv1d.w"].transpose(2, 1, 0)))
        net[0].bias.copy_(torch.tensor(arr["0.conv1d.b"]))
        net[3].weight.copy_(torch.tensor(arr["3.conv1d.w"].transpose(2, 1, 0)))
        net[3].bias.copy_(torch.tensor(arr["3.conv1d.b"]))
        net[7].weight.copy_(torch.tensor(arr["6.dense.w"].T))
        net[7].bias.copy_(torch.tensor(arr["6.dense.b"]))
        net[10].weight.copy_(torch.tensor(arr["9.dense.w"].T))
        net[10].bias.copy_(torch.tensor(arr["9.dense.b"]))
    net.eval()
    x = np.linspace(-2, 2, 3 * 21).reshape(3, 21)
    p = net(torch.tensor(x[:, None, :])).detach().numpy().ravel()
    print("net infer", p.tolist())
    assert np.allclose(p, ck.predict_proba(x), rtol=0, atol=1e-14)


if __name__ == "__main__":
    conv()
    bn()
    adam()
    network()
