"""towercalc: tower calculus for torsion-free hyperbolic groups.

Exact free-group arithmetic, centered splittings with retractability
deciders, the etage/tower algebra, core computation and classification up
to elementary equivalence, and discriminating-sequence verification.
"""

from .decision import Decision, NO, UNKNOWN, YES
from .folding import SubgroupGraph, fold, is_free_basis
from .surfaces import (N, S, Surface, b1_mod2_closed, euler_char,
                       is_exceptional, is_hyperbolic, parse_surface,
                       remove_pants)
from .words import (FreeHom, Word, abelianize, apply_hom, commutator,
                    cyclic_reduce, default_names, format_word, gen,
                    genus_oracle, identity, is_conjugate, parse_word, reduce,
                    verify_genus_witness, word)
from .splittings import (AtomFacts, CenteredSplitting, ClosedSurfaceGroup,
                         Edge, FreeGroup, FreeProduct, GroupExpr,
                         InvalidSplitting, PowerGluing, PrototypeAtom,
                         SurfaceEtage, Trivial, WordGluing, base,
                         format_expr, format_splitting, free_product,
                         grushko_blowup, make_K, make_facts,
                         make_multiparachute, make_parachute, to_dot,
                         validate)
from .retract import (BPM, PinchData, PinchPiece, build_retraction, check_bpm,
                      decide_retractable, identity_pinch, pinched_quotient,
                      verify_certificate)
from .towers import (b1_mod2, certify, etage_free_product, etage_surface,
                     is_tower, normalize_etages, stabilize, upgrade_to_simple)
from .classify import (CoreNormalForm, F2Core, core, ecore, equiv, is_efree,
                       is_minimal, is_prime, is_prototype,
                       minimal_efree_catalog)
from .limits import (EtagePresentation, baumslag_check, discriminating_report,
                     etage_presentation, rho_n, twist_auto,
                     verify_discriminating)
from .dsl import ParseError, parse_expr

__all__ = [name for name in dir() if not name.startswith("_")]
