# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from ..model import graph_names
from .multibisage import Variant as MultiBiSageVariant


class Variant(MultiBiSageVariant):
    '''MultiBiSage with a single first-level encoder reused by every graph;
    FFNs and global tokens stay graph specific.'''

    def names(self, i):
        return graph_names(i, encoder='shared.encoder')
