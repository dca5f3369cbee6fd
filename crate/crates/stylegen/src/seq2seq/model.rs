//! Model parameters and the forward computation.
//!
//! The encoder reads one input vector per slot-value pair (type
//! embedding ++ value embedding, ++ constraint under Method 2) through a
//! stacked bidirectional LSTM; position states are the concatenation of
//! the forward and backward hidden states. The decoder is a stacked
//! unidirectional LSTM whose step input is the previous target token's
//! embedding ++ an attention context (++ constraint under Method 3).
//! Attention is bilinear: `score(a, b) = a' W b`.

use crate::mr::{Granularity, MeaningRepresentation, MrError, SlotValue, StyleConstraint};
use crate::numerics::{glorot_init, Array, Graph, Node, Param, RngState};
use crate::textpipe::BOS_ID;

use super::lstm::{LstmNodes, LstmParams};
use super::{ConstraintVector, Method, ModelConfig, Seq2SeqError};

/// Pseudo slot type carrying the side constraint under Method 1.
pub const SIDE_CONSTRAINT_SLOT: &str = "side-constraint";

/// Method 1: encode the constraint as pseudo slot-value pairs prepended
/// to the MR. Fine control prepends one `param_<k>` slot per style bit,
/// then the personality slot, then the original slots unchanged.
pub fn apply_method1(
    mr: &MeaningRepresentation,
    constraint: &StyleConstraint,
    granularity: Granularity,
) -> Result<MeaningRepresentation, MrError> {
    let mut slots: Vec<SlotValue> = Vec::new();
    match constraint {
        StyleConstraint::None => return Ok(mr.clone()),
        StyleConstraint::Personality {
            personality,
            fine_params,
        } => {
            if granularity == Granularity::Fine {
                let bits = fine_params.ok_or_else(|| MrError::ConstraintModeMismatch {
                    mode: granularity,
                    detail: "fine control requires the 36 style parameters".into(),
                })?;
                for (k, bit) in bits.iter().enumerate() {
                    slots.push(SlotValue::new(
                        format!("param_{k}"),
                        if *bit == 1 { "1" } else { "0" },
                    ));
                }
            }
            slots.push(SlotValue::new(SIDE_CONSTRAINT_SLOT, personality.label()));
        }
        StyleConstraint::Contrast { contrast } => {
            slots.push(SlotValue::new(
                SIDE_CONSTRAINT_SLOT,
                if *contrast { "contrast" } else { "no-contrast" },
            ));
        }
    }
    slots.extend(mr.slots().iter().cloned());
    MeaningRepresentation::new(slots)
}

/// All trainable weights plus the shape information needed to rebuild
/// them from a checkpoint.
pub struct Model {
    pub config: ModelConfig,
    /// Width of the constraint vector consumed by M2/M3 (0 disables the
    /// extra input columns).
    pub c_dim: usize,
    pub vocab_sizes: (usize, usize, usize),
    pub slot_type_emb: Param,
    pub slot_value_emb: Param,
    pub target_emb: Param,
    pub enc_fwd: Vec<LstmParams>,
    pub enc_bwd: Vec<LstmParams>,
    pub bridge_h: Vec<Param>,
    pub bridge_c: Vec<Param>,
    pub dec: Vec<LstmParams>,
    pub attn_w: Param,
    pub out_w: Param,
    pub out_b: Param,
}

impl Model {
    /// Glorot-initializes a model. `c_dim` is the constraint width used
    /// by methods 2 and 3 (5 coarse personality, 41 fine, 1 contrast).
    pub fn init(
        config: ModelConfig,
        vocab_sizes: (usize, usize, usize),
        c_dim: usize,
        rng: RngState,
    ) -> Result<Model, Seq2SeqError> {
        config.validate()?;
        let (vt, vv, vy) = vocab_sizes;
        let e = config.embed_size;
        let h = config.rnn_size;
        let rng = rng.derive_str("model-init");

        let enc_in = |layer: usize| -> usize {
            if layer == 0 {
                2 * e + if config.method == Method::M2 { c_dim } else { 0 }
            } else {
                2 * h
            }
        };
        let dec_in = |layer: usize| -> usize {
            if layer == 0 {
                e + 2 * h + if config.method == Method::M3 { c_dim } else { 0 }
            } else {
                h
            }
        };

        let enc_fwd = (0..config.rnn_layers)
            .map(|l| {
                LstmParams::init(
                    &format!("enc.fwd{l}"),
                    enc_in(l),
                    h,
                    rng.derive_str(&format!("enc.fwd{l}")),
                )
            })
            .collect();
        let enc_bwd = (0..config.rnn_layers)
            .map(|l| {
                LstmParams::init(
                    &format!("enc.bwd{l}"),
                    enc_in(l),
                    h,
                    rng.derive_str(&format!("enc.bwd{l}")),
                )
            })
            .collect();
        let dec = (0..config.rnn_layers)
            .map(|l| {
                LstmParams::init(
                    &format!("dec.{l}"),
                    dec_in(l),
                    h,
                    rng.derive_str(&format!("dec{l}")),
                )
            })
            .collect();
        let bridge_h = (0..config.rnn_layers)
            .map(|l| {
                Param::new(
                    format!("bridge.h{l}"),
                    glorot_init(&[h, 2 * h], rng.derive_str(&format!("bridge.h{l}"))),
                )
            })
            .collect();
        let bridge_c = (0..config.rnn_layers)
            .map(|l| {
                Param::new(
                    format!("bridge.c{l}"),
                    glorot_init(&[h, 2 * h], rng.derive_str(&format!("bridge.c{l}"))),
                )
            })
            .collect();

        Ok(Model {
            config,
            c_dim,
            vocab_sizes,
            slot_type_emb: Param::new("emb.slot_type", glorot_init(&[vt, e], rng.derive_str("emb.t"))),
            slot_value_emb: Param::new("emb.slot_value", glorot_init(&[vv, e], rng.derive_str("emb.v"))),
            target_emb: Param::new("emb.target", glorot_init(&[vy, e], rng.derive_str("emb.y"))),
            enc_fwd,
            enc_bwd,
            bridge_h,
            bridge_c,
            dec,
            attn_w: Param::new("attn.w", glorot_init(&[h, 2 * h], rng.derive_str("attn.w"))),
            out_w: Param::new("out.w", glorot_init(&[vy, h], rng.derive_str("out.w"))),
            out_b: Param::new("out.b", glorot_init(&[vy], rng.derive_str("out.b"))),
        })
    }

    /// Every parameter in canonical (checkpoint) order.
    pub fn all_params(&self) -> Vec<Param> {
        let mut out = vec![
            self.slot_type_emb.clone(),
            self.slot_value_emb.clone(),
            self.target_emb.clone(),
        ];
        for cell in self.enc_fwd.iter().chain(&self.enc_bwd).chain(&self.dec) {
            out.extend(cell.params());
        }
        out.extend(self.bridge_h.iter().cloned());
        out.extend(self.bridge_c.iter().cloned());
        out.push(self.attn_w.clone());
        out.push(self.out_w.clone());
        out.push(self.out_b.clone());
        out
    }

    pub fn bind<'m>(&'m self, g: &mut Graph) -> BoundModel<'m> {
        BoundModel {
            model: self,
            type_emb: g.param(&self.slot_type_emb),
            value_emb: g.param(&self.slot_value_emb),
            target_emb: g.param(&self.target_emb),
            enc_fwd: self.enc_fwd.iter().map(|p| LstmNodes::bind(g, p)).collect(),
            enc_bwd: self.enc_bwd.iter().map(|p| LstmNodes::bind(g, p)).collect(),
            bridge_h: self.bridge_h.iter().map(|p| g.param(p)).collect(),
            bridge_c: self.bridge_c.iter().map(|p| g.param(p)).collect(),
            dec: self.dec.iter().map(|p| LstmNodes::bind(g, p)).collect(),
            attn_w: g.param(&self.attn_w),
            out_w: g.param(&self.out_w),
            out_b: g.param(&self.out_b),
        }
    }
}

/// Bilinear attention: `score_i = query' W state_i`, weights by softmax,
/// context as the weighted average of states.
pub fn attention(
    g: &mut Graph,
    query: Node,
    states: Node,
    attn_w: Node,
) -> Result<(Node, Node), Seq2SeqError> {
    let qw = g.matmul(query, attn_w)?;
    let scores = g.matmul(states, qw)?;
    let weights = g.softmax(scores)?;
    let states_t = g.transpose(states)?;
    let context = g.matmul(states_t, weights)?;
    Ok((context, weights))
}

/// Per-layer hidden/cell state of the decoder.
pub type DecoderState = Vec<(Node, Node)>;

/// Encoder output: stacked per-position states plus the decoder's
/// bridged initial state.
pub struct Encoded {
    pub states: Node,
    pub init_state: DecoderState,
}

/// Model weights bound into one graph.
pub struct BoundModel<'m> {
    model: &'m Model,
    type_emb: Node,
    value_emb: Node,
    target_emb: Node,
    enc_fwd: Vec<LstmNodes>,
    enc_bwd: Vec<LstmNodes>,
    bridge_h: Vec<Node>,
    bridge_c: Vec<Node>,
    dec: Vec<LstmNodes>,
    attn_w: Node,
    out_w: Node,
    out_b: Node,
}

impl<'m> BoundModel<'m> {
    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    /// Constraint vector as a graph constant, or `None` when the method
    /// ignores it.
    pub fn constraint_node(
        &self,
        g: &mut Graph,
        c: &ConstraintVector,
        for_method: Method,
    ) -> Result<Option<Node>, Seq2SeqError> {
        if self.model.config.method != for_method || self.model.c_dim == 0 {
            return Ok(None);
        }
        let fitted = c.fit(self.model.c_dim)?;
        Ok(Some(g.constant(Array::vector(fitted.values().to_vec()))))
    }

    /// Input vector of one slot-value pair: type embedding ++ value
    /// embedding, extended with the constraint under Method 2.
    pub fn encode_slot_value(
        &self,
        g: &mut Graph,
        type_id: u32,
        value_id: u32,
        m2_constraint: Option<Node>,
    ) -> Result<Node, Seq2SeqError> {
        let t = g.embedding_lookup(self.type_emb, type_id as usize)?;
        let v = g.embedding_lookup(self.value_emb, value_id as usize)?;
        let parts: Vec<Node> = match m2_constraint {
            Some(c) => vec![t, v, c],
            None => vec![t, v],
        };
        Ok(g.concat(&parts)?)
    }

    /// Runs the bidirectional encoder stack and bridges its final states
    /// into the decoder's initial state.
    pub fn encode(
        &self,
        g: &mut Graph,
        type_ids: &[u32],
        value_ids: &[u32],
        constraint: &ConstraintVector,
        training: bool,
        rng: RngState,
    ) -> Result<Encoded, Seq2SeqError> {
        debug_assert_eq!(type_ids.len(), value_ids.len());
        let m2c = self.constraint_node(g, constraint, Method::M2)?;
        let mut inputs: Vec<Node> = type_ids
            .iter()
            .zip(value_ids)
            .map(|(&t, &v)| self.encode_slot_value(g, t, v, m2c))
            .collect::<Result<_, _>>()?;

        let n = inputs.len();
        let p = self.model.config.dropout_p;
        let mut finals: Vec<(Node, Node, Node, Node)> = Vec::new();

        for layer in 0..self.model.config.rnn_layers {
            if layer > 0 {
                let mut stream = rng
                    .derive_str("enc-dropout")
                    .derive(layer as u64)
                    .stream();
                inputs = inputs
                    .into_iter()
                    .map(|x| g.dropout(x, p, training, &mut stream))
                    .collect();
            }
            let fwd = &self.enc_fwd[layer];
            let bwd = &self.enc_bwd[layer];

            let mut fwd_h = Vec::with_capacity(n);
            let mut state = fwd.zero_state(g);
            for &x in &inputs {
                state = fwd.step(g, x, state)?;
                fwd_h.push(state.0);
            }
            let fwd_final = state;

            let mut bwd_h = vec![None; n];
            let mut state = bwd.zero_state(g);
            for (j, &x) in inputs.iter().enumerate().rev() {
                state = bwd.step(g, x, state)?;
                bwd_h[j] = Some(state.0);
            }
            let bwd_final = state;

            inputs = (0..n)
                .map(|j| g.concat(&[fwd_h[j], bwd_h[j].unwrap()]))
                .collect::<Result<_, _>>()?;
            finals.push((fwd_final.0, fwd_final.1, bwd_final.0, bwd_final.1));
        }

        let states = g.stack(&inputs)?;
        let mut init_state = Vec::new();
        for (layer, (fh, fc, bh, bc)) in finals.iter().enumerate() {
            let cat_h = g.concat(&[*fh, *bh])?;
            let cat_c = g.concat(&[*fc, *bc])?;
            let bh_lin = g.matmul(self.bridge_h[layer], cat_h)?;
            let bc_lin = g.matmul(self.bridge_c[layer], cat_c)?;
            init_state.push((g.tanh(bh_lin), g.tanh(bc_lin)));
        }
        Ok(Encoded { states, init_state })
    }

    /// One decoder step under teacher forcing or search: consumes the
    /// previous token id, returns the logits node and the next state.
    /// The attention query is the top-layer hidden state entering the
    /// step.
    #[allow(clippy::too_many_arguments)]
    pub fn decode_step(
        &self,
        g: &mut Graph,
        state: &DecoderState,
        prev_token: u32,
        encoded_states: Node,
        m3_constraint: Option<Node>,
        training: bool,
        rng: RngState,
    ) -> Result<(Node, DecoderState), Seq2SeqError> {
        let w_prev = g.embedding_lookup(self.target_emb, prev_token as usize)?;
        let query = state.last().expect("decoder state").0;
        let (context, _weights) = attention(g, query, encoded_states, self.attn_w)?;

        let mut x = match m3_constraint {
            Some(c) => g.concat(&[w_prev, context, c])?,
            None => g.concat(&[w_prev, context])?,
        };
        let p = self.model.config.dropout_p;
        let mut next_state = Vec::with_capacity(state.len());
        for (layer, cell) in self.dec.iter().enumerate() {
            if layer > 0 {
                let mut stream = rng
                    .derive_str("dec-dropout")
                    .derive(layer as u64)
                    .stream();
                x = g.dropout(x, p, training, &mut stream);
            }
            let s = cell.step(g, x, state[layer])?;
            x = s.0;
            next_state.push(s);
        }
        let proj = g.matmul(self.out_w, x)?;
        let logits = g.add(proj, self.out_b)?;
        Ok((logits, next_state))
    }
}

/// Outcome of one teacher-forced pass: the summed cross-entropy node,
/// the number of predictions, and the token ids fed to the decoder
/// (instrumentation for the teacher-forcing contract).
pub struct TeacherForcedLoss {
    pub sum_nll: Node,
    pub token_count: usize,
    pub fed_tokens: Vec<u32>,
}

impl<'m> BoundModel<'m> {
    /// Teacher-forced negative log-likelihood of `target_ids ++ EOS`.
    /// The decoder consumes `BOS ++ target_ids` — always the ground
    /// truth, never its own samples.
    pub fn teacher_forced_loss(
        &self,
        g: &mut Graph,
        ex: &super::PreparedExample,
        training: bool,
        rng: RngState,
    ) -> Result<TeacherForcedLoss, Seq2SeqError> {
        let encoded = self.encode(
            g,
            &ex.type_ids,
            &ex.value_ids,
            &ex.constraint,
            training,
            rng.derive_str("enc"),
        )?;
        let m3c = self.constraint_node(g, &ex.constraint, Method::M3)?;

        let mut state = encoded.init_state;
        let mut fed_tokens = Vec::with_capacity(ex.target_ids.len() + 1);
        let mut sum_nll: Option<Node> = None;
        let steps = ex.target_ids.len() + 1;
        for t in 0..steps {
            let prev = if t == 0 {
                BOS_ID
            } else {
                ex.target_ids[t - 1]
            };
            fed_tokens.push(prev);
            let (logits, next) = self.decode_step(
                g,
                &state,
                prev,
                encoded.states,
                m3c,
                training,
                rng.derive_str("dec").derive(t as u64),
            )?;
            state = next;
            let target = if t < ex.target_ids.len() {
                ex.target_ids[t]
            } else {
                crate::textpipe::EOS_ID
            };
            let nll = g.cross_entropy(logits, target as usize)?;
            sum_nll = Some(match sum_nll {
                None => nll,
                Some(acc) => g.add(acc, nll)?,
            });
        }
        Ok(TeacherForcedLoss {
            sum_nll: sum_nll.expect("at least one step"),
            token_count: steps,
            fed_tokens,
        })
    }

    /// Mean per-token NLL as a scalar node.
    pub fn mean_loss(
        &self,
        g: &mut Graph,
        ex: &super::PreparedExample,
        training: bool,
        rng: RngState,
    ) -> Result<Node, Seq2SeqError> {
        let tf = self.teacher_forced_loss(g, ex, training, rng)?;
        Ok(g.scale(tf.sum_nll, 1.0 / tf.token_count as f64))
    }
}
