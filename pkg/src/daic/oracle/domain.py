"""Domain invariants: a prediction must be a digit the source form accepts."""

from dataclasses import dataclass, field

import numpy as np

from ..dataset import DEFAULT_FORMS, FORMS, FormSpec
from ..exceptions import ParameterError


@dataclass(frozen=True)
class DomainInvariant:
    form_spec: FormSpec = field(default_factory=lambda: DEFAULT_FORMS)

    def violated(self, form_ids, predicted_labels):
        """Vectorised check; True where the predicted digit is foreign to the form."""
        form_ids = np.asarray(form_ids)
        rows = np.searchsorted(np.array(FORMS), form_ids)
        if np.any(rows >= len(FORMS)) or np.any(np.array(FORMS)[np.minimum(rows, len(FORMS) - 1)] != form_ids):
            raise ParameterError(f"unknown form id in {np.unique(form_ids)}")
        return ~self.form_spec.allowed_mask()[rows, np.asarray(predicted_labels)]

    def to_text(self):
        lines = []
        for form in FORMS:
            allowed = ", ".join(str(v) for v in sorted(self.form_spec.allowed_labels[form]))
            lines.append(f"fail :- form={form} & label not in {{{allowed}}}")
        return "\n".join(lines)


def check_domain(inv: DomainInvariant, form_id, predicted_label) -> bool:
    return bool(inv.violated([form_id], [predicted_label])[0])
