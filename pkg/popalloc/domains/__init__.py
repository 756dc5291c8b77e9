# encoding: utf-8
# Importing the modules registers every domain with basedomain.DOMAINS
from . import cluster, loadbalance, traffic  # noqa
