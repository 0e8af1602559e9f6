from src.utils.decorator import node
from tests.conftest import make_state


@node
def _mutating_node(state, extra):
    state["history"].append({"epoch": state["epoch"]})
    state["epoch"] += 1
    extra.append("called")
    return state


def test_node_does_not_mutate_input_state():
    """노드는 입력 상태의 복사본을 받으므로 원본은 바뀌지 않습니다."""
    # Setup
    state = make_state(epoch=3)
    extra = []

    # Execute
    result = _mutating_node(state, extra)

    # Verify
    assert state["epoch"] == 3 and state["history"] == []
    assert result["epoch"] == 4 and len(result["history"]) == 1


def test_node_passes_extra_arguments_by_reference():
    """상태 외의 추가 인자는 복사되지 않습니다."""
    extra = []
    _mutating_node(make_state(), extra)
    assert extra == ["called"]


def test_node_keeps_function_name():
    assert _mutating_node.__name__ == "_mutating_node"
