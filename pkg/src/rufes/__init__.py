"""Fine-grained entity discovery toolkit: LTF ingestion, multitask CRF tagging,
ontology and rule-based type correction, coreference, and CEAF scoring."""

__version__ = "0.1.0"
