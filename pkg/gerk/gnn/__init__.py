from .config import Aggregator, GnnConfig, Updater
from .layers import GraphTensors, MessagePassingLayer, aggregate, gat_attention, update
from .metrics import f1_score, macro_f1, micro_f1
from .model import GnnModel, MlpModel, forward, graph_inputs, load_model, save_model
from .train import gradient, mlp_f1, node_embeddings, train, train_mlp
