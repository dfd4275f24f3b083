import numpy as np
import pytest

from leakysinelu import activations as zoo
from leakysinelu.errors import ConfigError, ShapeError
from leakysinelu.models import (
    ModelSpec,
    build_fcn,
    build_mlp,
    forward,
    init_params,
    load_checkpoint,
    n_params,
    predict,
    save_checkpoint,
)
from leakysinelu.optim import Adam


class TestBuildMlp:
    def test_binary_head_and_parameter_count(self):
        spec = build_mlp(24, 2, "leakysinelu")
        assert spec.head == "sigmoid" and spec.head_units == 1
        state = init_params(spec, 0)
        assert n_params(state) == 263_501

    def test_multiclass_head_and_widths(self):
        spec = build_mlp(24, 3, "relu")
        assert spec.head == "softmax" and spec.head_units == 3
        widths = [l["units"] for l in spec.layers if l["type"] == "dense"]
        assert widths == [500, 500, 3]

    def test_dropout_probabilities(self):
        spec = build_mlp(24, 3, "relu")
        probs = tuple(l["p"] for l in spec.layers if l["type"] == "dropout")
        assert probs == (0.1, 0.2, 0.3)

    def test_invalid_sizes(self):
        with pytest.raises(ConfigError):
            build_mlp(0, 2, "relu")
        with pytest.raises(ConfigError):
            build_mlp(24, 1, "relu")


class TestBuildFcn:
    def test_blocks(self):
        spec = build_fcn(96, 5, "snake")
        convs = [(l["channels"], l["kernel"]) for l in spec.layers if l["type"] == "conv"]
        assert convs == [(128, 8), (256, 5), (128, 3)]
        assert spec.head == "softmax" and spec.head_units == 5
        dense = [l for l in spec.layers if l["type"] == "dense"]
        assert len(dense) == 1 and dense[0]["units"] == 5

    def test_forward_shape_trace(self):
        spec = build_fcn(96, 5, "snake")
        state = init_params(spec, 0)
        x = np.random.default_rng(0).normal(size=(4, 1, 96))
        assert forward(spec, state, x).data.shape == (4, 5)

    def test_norm_disabled(self):
        spec = build_fcn(24, 3, "relu", norm_enabled=False)
        assert not any(l["type"] == "batch_norm" for l in spec.layers)
        assert sum(l["type"] == "batch_norm" for l in build_fcn(24, 3, "relu").layers) == 3


class TestInitParams:
    def test_deterministic(self):
        spec = build_mlp(24, 3, "prelu")
        a = init_params(spec, 7)
        b = init_params(spec, 7)
        assert set(a.params) == set(b.params)
        for name in a.params:
            assert np.array_equal(a.params[name], b.params[name])

    def test_weight_variance_matches_scheme(self):
        spec = build_mlp(24, 3, "relu")
        state = init_params(spec, 0)
        w = state.params["l4.W"]  # the 500 -> 500 layer
        assert w.shape == (500, 500)
        assert abs(w.var() - 2.0 / 500) / (2.0 / 500) < 0.2

    def test_biases_zero(self):
        spec = build_fcn(24, 3, "relu")
        state = init_params(spec, 3)
        for name, arr in state.params.items():
            if name.endswith(".b") or name.endswith(".beta"):
                assert np.array_equal(arr, np.zeros_like(arr))

    def test_prelu_alpha_per_neuron(self):
        spec = build_mlp(24, 3, "prelu")
        state = init_params(spec, 0)
        alphas = [v for k, v in state.params.items() if k.endswith(".alpha")]
        assert [a.shape for a in alphas] == [(500,), (500,)]
        assert all(np.all(a == 0.25) for a in alphas)

    def test_snake_a_not_trainable_by_default(self):
        spec = build_fcn(24, 3, "snake")
        state = init_params(spec, 0)
        assert not any(k.endswith(".a") for k in state.params)


class TestForward:
    @pytest.mark.parametrize("arch", ["mlp", "fcn"])
    @pytest.mark.parametrize("batch", [1, 2, 5])
    def test_output_shape(self, arch, batch):
        build = build_mlp if arch == "mlp" else build_fcn
        spec = build(24, 3, "leakysinelu")
        state = init_params(spec, 0)
        rng = np.random.default_rng(0)
        flat = forward(spec, state, rng.normal(size=(batch, 24)))
        assert flat.data.shape == (batch, 3)
        chan = forward(spec, state, rng.normal(size=(batch, 1, 24)))
        assert chan.data.shape == (batch, 3)

    def test_wrong_length_rejected(self):
        spec = build_mlp(24, 3, "relu")
        state = init_params(spec, 0)
        with pytest.raises(ShapeError):
            forward(spec, state, np.zeros((2, 25)))

    def test_predict_tie_breaks_to_lowest_index(self):
        spec = build_mlp(8, 3, "relu")
        state = init_params(spec, 0)
        for name in state.params:
            state.params[name][:] = 0.0
        preds = predict(spec, state, np.random.default_rng(1).normal(size=(6, 8)))
        assert np.array_equal(preds, np.zeros(6, dtype=np.int64))


class TestSerialization:
    def test_spec_round_trip(self):
        for spec in (
            build_mlp(24, 2, "leakysinelu"),
            build_fcn(96, 5, zoo.activation("prelu")),
            build_fcn(24, 3, "relu", norm_enabled=False),
        ):
            assert ModelSpec.from_json(spec.to_json()) == spec

    def test_checkpoint_round_trip(self, tmp_path):
        spec = build_fcn(24, 3, "prelu")
        state = init_params(spec, 5)
        opt = Adam()
        opt_state = opt.init_state(state.params)
        opt.step(opt_state, state.params, {k: np.ones_like(v) for k, v in state.params.items()})
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, spec, state, opt_state)
        spec2, state2, opt2 = load_checkpoint(path)
        assert spec2 == spec
        assert state2.seed == 5
        for name in state.params:
            assert np.array_equal(state.params[name], state2.params[name])
        for name in state.buffers:
            assert np.array_equal(state.buffers[name], state2.buffers[name])
        assert opt2.step_count == 1
        for name in opt_state.slots:
            for slot in opt_state.slots[name]:
                assert np.array_equal(opt_state.slots[name][slot], opt2.slots[name][slot])
