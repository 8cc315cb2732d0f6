use super::layout::SampleLayout;
use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::updaters::{Messages, Scope, Updater};

/// Feature matrices of a GIG sample during one forward pass, all `d` wide.
/// The wiring lives in the [`SampleLayout`] and never changes.
#[derive(Clone, Copy, Debug)]
pub struct GigState {
    /// Graph vertices `[N_total×d]`.
    pub v: Var,
    /// Graph edges `[E_total×d]`.
    pub e: Var,
    /// Local proxies `[I×d]`.
    pub pl: Var,
    /// Global proxies `[I×d]`.
    pub pg: Var,
    /// Inbound proxy edges.
    pub e_in: Var,
    /// Outbound proxy edges.
    pub e_out: Var,
    /// GIG edges.
    pub e_gig: Var,
}

/// Which modules a layer runs, and in which order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LayerFlags {
    pub disable_gvu: bool,
    pub disable_ggu: bool,
    pub ggu_first: bool,
}

fn edge_update(u: &dyn Updater, tape: &mut Tape, p: Scope<'_>, e: Var, src: Var, dst: Var) -> Result<Var> {
    if u.updates_edges() {
        u.edge_update(tape, p, e, src, dst)
    } else {
        Ok(e)
    }
}

/// Local update of every GIG vertex: graph edges, then graph vertices
/// (synchronously, from pre-update neighbours), then inbound proxy edges,
/// then local proxies. Global proxies, outbound proxy edges and GIG edges
/// are left alone.
pub fn gvu_forward(tape: &mut Tape, u: &dyn Updater, p: Scope<'_>, lay: &SampleLayout, s: GigState) -> Result<GigState> {
    let src = tape.gather_rows(s.v, &lay.edge_src)?;
    let dst = tape.gather_rows(s.v, &lay.edge_dst)?;
    let e = edge_update(u, tape, p, s.e, src, dst)?;
    let msgs = Messages {
        edges: e,
        neighbors: src,
        targets: lay.edge_dst.clone(),
    };
    let v = u.vertex_update(tape, p, s.v, &msgs)?;

    let from = tape.gather_rows(v, &lay.pin_vertex)?;
    let proxy = tape.gather_rows(s.pl, &lay.pin_owner)?;
    let e_in = edge_update(u, tape, p, s.e_in, from, proxy)?;
    let msgs = Messages {
        edges: e_in,
        neighbors: from,
        targets: lay.pin_owner.clone(),
    };
    let pl = u.vertex_update(tape, p, s.pl, &msgs)?;
    Ok(GigState { v, e, pl, e_in, ..s })
}

/// Global update: GIG edges, global proxies, outbound proxy edges, then the
/// graph vertices those edges reach. Graph edges and every other graph
/// vertex are left alone.
pub fn ggu_forward(tape: &mut Tape, u: &dyn Updater, p: Scope<'_>, lay: &SampleLayout, s: GigState) -> Result<GigState> {
    let from = tape.gather_rows(s.pl, &lay.gig_src)?;
    let to = tape.gather_rows(s.pg, &lay.gig_dst)?;
    let e_gig = edge_update(u, tape, p, s.e_gig, from, to)?;
    let msgs = Messages {
        edges: e_gig,
        neighbors: from,
        targets: lay.gig_dst.clone(),
    };
    let pg = u.vertex_update(tape, p, s.pg, &msgs)?;

    let proxy = tape.gather_rows(pg, &lay.pout_owner)?;
    let target = tape.gather_rows(s.v, &lay.pout_vertex)?;
    let e_out = edge_update(u, tape, p, s.e_out, proxy, target)?;
    // each connected vertex receives exactly one message, from its own proxy
    let sub = tape.gather_rows(s.v, &lay.connected)?;
    let msgs = Messages {
        edges: e_out,
        neighbors: proxy,
        targets: lay.pout_slot.clone(),
    };
    let updated = u.vertex_update(tape, p, sub, &msgs)?;
    let v = merge_rows(tape, lay, s.v, updated, &lay.connected, &lay.keep_unconnected)?;
    Ok(GigState { v, pg, e_out, e_gig, ..s })
}

/// Replaces the rows `rows` of `v` with `updated`; `keep` zeroes exactly
/// those rows.
fn merge_rows(
    tape: &mut Tape,
    lay: &SampleLayout,
    v: Var,
    updated: Var,
    rows: &std::sync::Arc<[usize]>,
    keep: &std::sync::Arc<[f64]>,
) -> Result<Var> {
    let kept = tape.scale_rows(v, keep)?;
    let placed = tape.scatter_add_rows(updated, rows, lay.total_vertices())?;
    tape.add(kept, placed)
}

/// The extra output-layer steps after GGU: every graph edge is updated again
/// from its latest endpoints with the GVU edge function, then every vertex
/// not reached by an outbound proxy edge is updated once with the GVU vertex
/// function.
pub fn output_refresh(
    tape: &mut Tape,
    u: &dyn Updater,
    p_gvu: Scope<'_>,
    lay: &SampleLayout,
    s: GigState,
) -> Result<GigState> {
    let src = tape.gather_rows(s.v, &lay.edge_src)?;
    let dst = tape.gather_rows(s.v, &lay.edge_dst)?;
    let e = edge_update(u, tape, p_gvu, s.e, src, dst)?;

    let sub = tape.gather_rows(s.v, &lay.unconnected)?;
    let msgs = Messages {
        edges: tape.gather_rows(e, &lay.residual_edges)?,
        neighbors: tape.gather_rows(s.v, &lay.residual_src)?,
        targets: lay.residual_slot.clone(),
    };
    let updated = u.vertex_update(tape, p_gvu, sub, &msgs)?;
    let v = merge_rows(tape, lay, s.v, updated, &lay.unconnected, &lay.keep_connected)?;
    Ok(GigState { v, e, ..s })
}

pub fn hidden_layer_forward(
    tape: &mut Tape,
    u: &dyn Updater,
    p_gvu: Scope<'_>,
    p_ggu: Scope<'_>,
    lay: &SampleLayout,
    flags: LayerFlags,
    s: GigState,
) -> Result<GigState> {
    let gvu = |tape: &mut Tape, s| if flags.disable_gvu { Ok(s) } else { gvu_forward(tape, u, p_gvu, lay, s) };
    let ggu = |tape: &mut Tape, s| if flags.disable_ggu { Ok(s) } else { ggu_forward(tape, u, p_ggu, lay, s) };
    if flags.ggu_first {
        let s = ggu(tape, s)?;
        gvu(tape, s)
    } else {
        let s = gvu(tape, s)?;
        ggu(tape, s)
    }
}

/// GVU followed by GGU and the output refresh. With GGU disabled this is a
/// plain GVU; with `ggu_first` it runs GGU then GVU, which already refreshes
/// every edge and vertex.
pub fn output_layer_forward(
    tape: &mut Tape,
    u: &dyn Updater,
    p_gvu: Scope<'_>,
    p_ggu: Scope<'_>,
    lay: &SampleLayout,
    flags: LayerFlags,
    s: GigState,
) -> Result<GigState> {
    if flags.disable_ggu {
        return if flags.disable_gvu { Ok(s) } else { gvu_forward(tape, u, p_gvu, lay, s) };
    }
    if flags.ggu_first && !flags.disable_gvu {
        let s = ggu_forward(tape, u, p_ggu, lay, s)?;
        return gvu_forward(tape, u, p_gvu, lay, s);
    }
    if flags.disable_gvu {
        // there is no GVU parameter set to re-employ
        let s = ggu_forward(tape, u, p_ggu, lay, s)?;
        return output_refresh(tape, u, p_ggu, lay, s);
    }
    let s = gvu_forward(tape, u, p_gvu, lay, s)?;
    let s = ggu_forward(tape, u, p_ggu, lay, s)?;
    output_refresh(tape, u, p_gvu, lay, s)
}
