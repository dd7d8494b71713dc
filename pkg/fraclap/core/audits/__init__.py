from .base import AuditRegistry, AuditResult, BaseAudit, audit_registry, register_audit
from .mesh import ComplexityAudit, ConformityAudit, SeminormMarkingAudit
from .sobolev import BBMAudit, DistancePowerAudit, GradientBlowupAudit, LocalizationAudit, RegularityAudit
from .structural import ClosedFormAudit, StructuralAudit

# Register all audits, cheapest first
register_audit(ConformityAudit())
register_audit(ClosedFormAudit())
register_audit(DistancePowerAudit())
register_audit(GradientBlowupAudit())
register_audit(BBMAudit())
register_audit(RegularityAudit())
register_audit(StructuralAudit())
register_audit(LocalizationAudit())
register_audit(ComplexityAudit())
register_audit(SeminormMarkingAudit())
