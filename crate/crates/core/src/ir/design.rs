//! Word-level design modules: declared inputs, state signals with next-state
//! expressions, observable sets; cone-of-influence pruning and time-frame
//! unrolling.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::sexpr::{parse_expr, print_expr};
use super::IrError;

pub type DesignId = [u8; 32];

#[derive(Clone, Debug)]
pub struct StateSignal {
    pub name: String,
    pub width: u32,
    pub init: Option<u64>,
    pub next: Expr,
}

/// A sequential design: inputs are free every frame; each state signal's
/// frame-(t+1) value is its next-state expression over frame-t signals.
#[derive(Clone, Debug)]
pub struct DesignModule {
    pub id: DesignId,
    pub inputs: Vec<(String, u32)>,
    pub signals: Vec<StateSignal>,
    pub observable: Vec<String>,
}

impl DesignModule {
    /// Validates name uniqueness, reference resolution, width consistency,
    /// and the observable set.
    pub fn validate(&self) -> Result<(), IrError> {
        let mut widths: BTreeMap<&str, u32> = BTreeMap::new();
        for (name, width) in &self.inputs {
            if *width == 0 || *width > super::expr::MAX_WIDTH {
                return Err(IrError::WidthMismatch {
                    context: format!("input {name} has width {width}"),
                });
            }
            if widths.insert(name, *width).is_some() {
                return Err(IrError::DuplicateSignal(name.clone()));
            }
        }
        for s in &self.signals {
            if s.width == 0 || s.width > super::expr::MAX_WIDTH {
                return Err(IrError::WidthMismatch {
                    context: format!("signal {} has width {}", s.name, s.width),
                });
            }
            if widths.insert(&s.name, s.width).is_some() {
                return Err(IrError::DuplicateSignal(s.name.clone()));
            }
        }
        let lookup = |name: &str| widths.get(name).copied();
        for s in &self.signals {
            let w = s.next.width(&lookup)?;
            if w != s.width {
                return Err(IrError::WidthMismatch {
                    context: format!("next({}) has width {w}, signal is {}", s.name, s.width),
                });
            }
            if let Some(init) = s.init {
                if s.width < 64 && init >> s.width != 0 {
                    return Err(IrError::BadConstant {
                        width: s.width,
                        value: init,
                    });
                }
            }
        }
        for name in &self.observable {
            if !widths.contains_key(name.as_str()) {
                return Err(IrError::UnknownSignal(name.clone()));
            }
        }
        Ok(())
    }

    pub fn signal_width(&self, name: &str) -> Option<u32> {
        self.inputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, w)| *w)
            .or_else(|| {
                self.signals
                    .iter()
                    .find(|s| s.name == name)
                    .map(|s| s.width)
            })
    }

    /// Per-signal control depth: minimum ite-condition depth across all
    /// next-state expressions, 1 being an outermost condition.
    pub fn control_depths(&self) -> BTreeMap<String, u32> {
        let mut depths = BTreeMap::new();
        for s in &self.signals {
            s.next.collect_control_depths(&mut depths);
        }
        depths
    }

    /// Keeps exactly the transitive fan-in of the property signals (through
    /// next-state references, to fixpoint) plus the property signals.
    pub fn prune_coi(&self, property_signals: &[String]) -> Result<DesignModule, IrError> {
        for name in property_signals {
            if self.signal_width(name).is_none() {
                return Err(IrError::UnknownSignal(name.clone()));
            }
        }
        let mut keep: BTreeSet<String> = property_signals.iter().cloned().collect();
        loop {
            let mut grew = false;
            for s in &self.signals {
                if keep.contains(&s.name) {
                    for dep in s.next.referenced_signals() {
                        grew |= keep.insert(dep);
                    }
                }
            }
            if !grew {
                break;
            }
        }
        Ok(DesignModule {
            id: self.id,
            inputs: self
                .inputs
                .iter()
                .filter(|(n, _)| keep.contains(n))
                .cloned()
                .collect(),
            signals: self
                .signals
                .iter()
                .filter(|s| keep.contains(&s.name))
                .cloned()
                .collect(),
            observable: self
                .observable
                .iter()
                .filter(|n| keep.contains(*n))
                .cloned()
                .collect(),
        })
    }

    /// Instantiates frames `1..=bound`. Frame-1 state is free unless an init
    /// value is declared; inputs are free every frame.
    pub fn unroll(&self, bound: u32) -> Result<UnrolledDesign, IrError> {
        if bound == 0 {
            return Err(IrError::BadBound);
        }
        self.validate()?;
        let mut vars = Vec::new();
        for t in 1..=bound {
            for (name, width) in &self.inputs {
                vars.push(FrameVar {
                    name: frame_name(name, t),
                    width: *width,
                });
            }
            for s in &self.signals {
                vars.push(FrameVar {
                    name: frame_name(&s.name, t),
                    width: s.width,
                });
            }
        }
        let mut constraints = Vec::new();
        for t in 1..bound {
            for s in &self.signals {
                let expr = s.next.rename_signals(&|n| frame_name(n, t));
                constraints.push(TransitionConstraint {
                    target: frame_name(&s.name, t + 1),
                    width: s.width,
                    expr,
                });
            }
        }
        let init = self
            .signals
            .iter()
            .filter_map(|s| s.init.map(|v| (frame_name(&s.name, 1), s.width, v)))
            .collect();
        let control_depths = self.control_depths();
        let mut per_frame_depths = BTreeMap::new();
        for (name, depth) in &control_depths {
            for t in 1..=bound {
                per_frame_depths.insert(frame_name(name, t), *depth);
            }
        }
        Ok(UnrolledDesign {
            bound,
            vars,
            constraints,
            init,
            observable: self.observable.clone(),
            control_depths: per_frame_depths,
        })
    }

    /// Concrete word-level execution over `bound` frames. `inputs` maps each
    /// input name to one value per frame; `initial_state` supplies frame-1
    /// values for signals without a declared init. Returns every
    /// `signal#frame` value.
    pub fn evaluate(
        &self,
        bound: u32,
        inputs: &BTreeMap<String, Vec<u64>>,
        initial_state: &BTreeMap<String, u64>,
    ) -> Result<BTreeMap<String, u64>, IrError> {
        if bound == 0 {
            return Err(IrError::BadBound);
        }
        let mut values: BTreeMap<String, u64> = BTreeMap::new();
        for (name, _) in &self.inputs {
            let series = inputs
                .get(name)
                .ok_or_else(|| IrError::UnknownSignal(name.clone()))?;
            for t in 1..=bound {
                values.insert(frame_name(name, t), series[(t - 1) as usize]);
            }
        }
        for s in &self.signals {
            let v = match s.init {
                Some(init) => init,
                None => *initial_state
                    .get(&s.name)
                    .ok_or_else(|| IrError::UnknownSignal(s.name.clone()))?,
            };
            values.insert(frame_name(&s.name, 1), v);
        }
        for t in 1..bound {
            for s in &self.signals {
                let env = |name: &str| -> Option<(u32, u64)> {
                    let w = self.signal_width(name)?;
                    values.get(&frame_name(name, t)).map(|&v| (w, v))
                };
                let (_, v) = s.next.eval(&env)?;
                values.insert(frame_name(&s.name, t + 1), v);
            }
        }
        Ok(values)
    }

    pub fn to_json(&self) -> String {
        let doc = DesignDoc {
            id: hex::encode(self.id),
            inputs: self
                .inputs
                .iter()
                .map(|(name, width)| PortDoc {
                    name: name.clone(),
                    width: *width,
                })
                .collect(),
            signals: self
                .signals
                .iter()
                .map(|s| SignalDoc {
                    name: s.name.clone(),
                    width: s.width,
                    init: s.init,
                    next: print_expr(&s.next),
                })
                .collect(),
            observable: self.observable.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<DesignModule, IrError> {
        let doc: DesignDoc = serde_json::from_str(text)?;
        let id_bytes = hex::decode(&doc.id).map_err(|e| IrError::Parse(format!("bad id: {e}")))?;
        let id: DesignId = id_bytes
            .try_into()
            .map_err(|_| IrError::Parse("design id must be 32 bytes of hex".into()))?;
        let module = DesignModule {
            id,
            inputs: doc.inputs.into_iter().map(|p| (p.name, p.width)).collect(),
            signals: doc
                .signals
                .into_iter()
                .map(|s| {
                    Ok(StateSignal {
                        name: s.name,
                        width: s.width,
                        init: s.init,
                        next: parse_expr(&s.next)?,
                    })
                })
                .collect::<Result<_, IrError>>()?,
            observable: doc.observable,
        };
        module.validate()?;
        Ok(module)
    }
}

pub fn frame_name(signal: &str, frame: u32) -> String {
    format!("{signal}#{frame}")
}

/// Splits `"sig#t"` into the signal name and frame index.
pub fn split_frame_name(name: &str) -> Option<(&str, u32)> {
    let (sig, frame) = name.rsplit_once('#')?;
    frame.parse().ok().map(|t| (sig, t))
}

#[derive(Clone, Debug)]
pub struct FrameVar {
    pub name: String,
    pub width: u32,
}

#[derive(Clone, Debug)]
pub struct TransitionConstraint {
    /// Frame-(t+1) variable the expression defines.
    pub target: String,
    pub width: u32,
    /// Expression over frame-t variables.
    pub expr: Expr,
}

/// A frame-indexed expansion of a design over a fixed bound.
#[derive(Clone, Debug)]
pub struct UnrolledDesign {
    pub bound: u32,
    /// All frame variables, frame-major then declaration order.
    pub vars: Vec<FrameVar>,
    pub constraints: Vec<TransitionConstraint>,
    /// Declared init values pinning frame-1 state: (var, width, value).
    pub init: Vec<(String, u32, u64)>,
    /// Observable signal names (unframed).
    pub observable: Vec<String>,
    /// Control depth per `signal#frame`.
    pub control_depths: BTreeMap<String, u32>,
}

impl UnrolledDesign {
    pub fn var_width(&self, name: &str) -> Option<u32> {
        self.vars.iter().find(|v| v.name == name).map(|v| v.width)
    }
}

#[derive(Serialize, Deserialize)]
struct PortDoc {
    name: String,
    width: u32,
}

#[derive(Serialize, Deserialize)]
struct SignalDoc {
    name: String,
    width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<u64>,
    next: String,
}

#[derive(Serialize, Deserialize)]
struct DesignDoc {
    id: String,
    inputs: Vec<PortDoc>,
    signals: Vec<SignalDoc>,
    observable: Vec<String>,
}
