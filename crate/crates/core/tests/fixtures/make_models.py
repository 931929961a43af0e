"""Builds the tiny ONNX models used by the model-backend tests.

The network averages each channel of a 1x299x299x3 input in [-1, 1] and
feeds the three means through a dense 3->4 layer followed by softmax, so the
expected probabilities for a uniform image can be computed by hand.
"""
import numpy as np
import onnx
from onnx import TensorProto, helper

CANONICAL = ["normal", "smoking", "calling", "smoking_calling"]

# column k holds the weights of canonical class k
WEIGHTS = np.array(
    [
        [0.0, 4.0, 0.0, 0.0],
        [0.0, 0.0, 4.0, 0.0],
        [0.0, 0.0, 0.0, 4.0],
    ],
    dtype=np.float32,
)
BIAS = np.array([0.5, 0.0, 0.0, 0.0], dtype=np.float32)


def build(order, path, metadata=True):
    perm = [CANONICAL.index(name) for name in order]
    w = WEIGHTS[:, perm]
    b = BIAS[perm]
    nodes = [
        helper.make_node("ReduceMean", ["input"], ["mean"], axes=[1, 2], keepdims=0),
        helper.make_node("MatMul", ["mean", "w"], ["mm"]),
        helper.make_node("Add", ["mm", "b"], ["logits"]),
        helper.make_node("Softmax", ["logits"], ["probs"], axis=-1),
    ]
    graph = helper.make_graph(
        nodes,
        "vigil_fixture",
        [helper.make_tensor_value_info("input", TensorProto.FLOAT, [1, 299, 299, 3])],
        [helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, 4])],
        initializer=[
            helper.make_tensor("w", TensorProto.FLOAT, [3, 4], w.flatten().tolist()),
            helper.make_tensor("b", TensorProto.FLOAT, [4], b.tolist()),
        ],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
    model.ir_version = 8
    if metadata:
        helper.set_model_props(model, {"class_order": ",".join(order)})
    onnx.checker.check_model(model)
    onnx.save(model, path)


if __name__ == "__main__":
    build(CANONICAL, "mean_color.onnx")
    build(["smoking_calling", "calling", "normal", "smoking"], "mean_color_permuted.onnx")
    build(CANONICAL, "no_class_order.onnx", metadata=False)
