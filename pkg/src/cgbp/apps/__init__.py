"""Cutting stock and network service-path models on top of the CG/BP engine."""
from . import cutting_stock, net_path
from .cutting_stock import CuttingStockInstance, InstanceError, build_cutting_stock
from .instances import (SchemaError, dumps_instance, generate_cutting_stock, generate_net_path, load_instance,
                        loads_instance, save_instance)
from .net_path import Arc, NetPathInstance, Task, build_net_path


def build_model(inst):
    if isinstance(inst, CuttingStockInstance):
        return build_cutting_stock(inst)
    if isinstance(inst, NetPathInstance):
        return build_net_path(inst)
    raise TypeError(f"unknown instance type {type(inst).__name__}")


def warm_start(model, inst):
    if isinstance(inst, CuttingStockInstance):
        return cutting_stock.warm_start(model, inst)
    return net_path.warm_start(model, inst)
