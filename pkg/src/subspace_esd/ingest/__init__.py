"""Connection parsing, entropy windows, packet histograms and synthetic corpora."""

from .connections import (
    Column,
    ConnectionRecord,
    Schema,
    kyoto_schema,
    load_schema,
    parse_connections,
    save_schema,
    write_connections,
)
from .entropy import (
    MIN_SUPPORT,
    FeatureWindow,
    bucket_value,
    entropy_windows,
    shannon_entropy,
    windows_to_matrix,
    write_windows_csv,
)
from .kyoto import KyotoCorpus, synth_connections, synth_kyoto
from .packets import (
    PROTOCOLS,
    PacketHistogram,
    histograms_to_matrix,
    packet_histograms,
    protocol_bin,
    size_bin,
    synth_caida,
    synth_packets,
    write_histograms_csv,
)
