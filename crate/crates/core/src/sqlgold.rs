//! Gold table/field extraction from reference SQL.
//!
//! Queries are parsed to an AST, then walked with scope analysis and alias
//! resolution so every field reference maps back to its physical table.
//! CTE and subquery output columns carry lineage to physical fields; output
//! aliases never become gold items. A syntactic second-opinion re-walk of the
//! same AST cross-checks the resolved sets and records disagreements as
//! diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sqlparser::ast as sql;
use sqlparser::dialect::{Dialect, GenericDialect, SQLiteDialect, SnowflakeDialect};
use sqlparser::parser::Parser;

use crate::catalog::{SchemaCatalog, SchemaItemId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqlDialect {
    #[default]
    Ansi,
    SqliteLike,
    SnowflakeLike,
}

impl std::str::FromStr for SqlDialect {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "ansi" | "generic" => Ok(SqlDialect::Ansi),
            "sqlite" | "sqlite-like" => Ok(SqlDialect::SqliteLike),
            "snowflake" | "snowflake-like" => Ok(SqlDialect::SnowflakeLike),
            other => Err(Error::InvalidArgument(format!("unknown dialect `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldSchema {
    pub instance_id: String,
    pub database: String,
    pub tables: BTreeSet<SchemaItemId>,
    pub fields: BTreeSet<SchemaItemId>,
    pub diagnostics: Vec<String>,
}

/// Parse one SQL statement; it must be a query.
pub fn parse_sql(sql_text: &str, dialect: SqlDialect) -> Result<sql::Query> {
    if sql_text.trim().is_empty() {
        return Err(Error::SqlParse("empty statement".into()));
    }
    let d: Box<dyn Dialect> = match dialect {
        SqlDialect::Ansi => Box::new(GenericDialect {}),
        SqlDialect::SqliteLike => Box::new(SQLiteDialect {}),
        SqlDialect::SnowflakeLike => Box::new(SnowflakeDialect {}),
    };
    let mut statements =
        Parser::parse_sql(d.as_ref(), sql_text).map_err(|e| Error::SqlParse(e.to_string()))?;
    if statements.len() != 1 {
        return Err(Error::SqlParse(format!(
            "expected exactly one statement, found {}",
            statements.len()
        )));
    }
    match statements.remove(0) {
        sql::Statement::Query(q) => Ok(*q),
        other => Err(Error::Unsupported(format!(
            "only queries are supported, found {}",
            statement_kind(&other)
        ))),
    }
}

fn statement_kind(s: &sql::Statement) -> &'static str {
    match s {
        sql::Statement::Insert { .. } => "INSERT",
        sql::Statement::Update { .. } => "UPDATE",
        sql::Statement::Delete { .. } => "DELETE",
        sql::Statement::CreateTable { .. } => "CREATE TABLE",
        _ => "a non-query statement",
    }
}

// ---------------------------------------------------------------------------
// Scope model

/// One output column of a relation: its (lowercase) name when nameable, and
/// the physical fields it depends on.
#[derive(Debug, Clone)]
struct OutCol {
    name: Option<String>,
    deps: BTreeSet<SchemaItemId>,
}

#[derive(Debug, Clone)]
enum RelKind {
    Physical(SchemaItemId),
    Derived(Vec<OutCol>),
}

#[derive(Debug, Clone)]
struct Relation {
    alias: String,
    kind: RelKind,
}

type Frame = Vec<Relation>;
type CteEnv = BTreeMap<String, Vec<OutCol>>;

struct Ctx<'a> {
    env: CteEnv,
    /// Enclosing scopes, outermost first. The innermost frame for the query
    /// under analysis is built locally and appended when recursing.
    outer: &'a [Frame],
}

struct Resolver<'a> {
    catalog: &'a SchemaCatalog,
    tables: BTreeSet<SchemaItemId>,
    fields: BTreeSet<SchemaItemId>,
    diagnostics: Vec<String>,
}

fn relation_has_column(catalog: &SchemaCatalog, rel: &Relation, column: &str) -> bool {
    match &rel.kind {
        RelKind::Physical(tid) => catalog.resolve_field(tid, column).is_some(),
        RelKind::Derived(cols) => cols.iter().any(|c| c.name.as_deref() == Some(column)),
    }
}

impl<'a> Resolver<'a> {
    fn new(catalog: &'a SchemaCatalog) -> Self {
        Self {
            catalog,
            tables: BTreeSet::new(),
            fields: BTreeSet::new(),
            diagnostics: Vec::new(),
        }
    }

    fn record_deps(&mut self, deps: &BTreeSet<SchemaItemId>) {
        for d in deps {
            self.fields.insert(d.clone());
        }
    }

    fn resolve_in_relation(
        &mut self,
        rel: &Relation,
        column: &str,
    ) -> Result<BTreeSet<SchemaItemId>> {
        match &rel.kind {
            RelKind::Physical(tid) => {
                let fid = self.catalog.resolve_field(tid, column).ok_or_else(|| {
                    Error::UnknownIdentifier(format!("column `{}` of `{}`", column, rel.alias))
                })?;
                Ok([fid].into_iter().collect())
            }
            RelKind::Derived(cols) => {
                let c = cols
                    .iter()
                    .find(|c| c.name.as_deref() == Some(column))
                    .ok_or_else(|| {
                        Error::UnknownIdentifier(format!(
                            "column `{}` of subquery `{}`",
                            column, rel.alias
                        ))
                    })?;
                Ok(c.deps.clone())
            }
        }
    }

    /// Qualified reference `q.c`: find the relation aliased `q`, innermost
    /// scope first.
    fn resolve_qualified(
        &mut self,
        scopes: &[Frame],
        qualifier: &str,
        column: &str,
    ) -> Result<BTreeSet<SchemaItemId>> {
        for frame in scopes.iter().rev() {
            if let Some(rel) = frame.iter().find(|r| r.alias == qualifier) {
                let rel = rel.clone();
                let deps = self.resolve_in_relation(&rel, column)?;
                self.record_deps(&deps);
                return Ok(deps);
            }
        }
        Err(Error::UnknownIdentifier(format!(
            "table or alias `{qualifier}`"
        )))
    }

    /// Unqualified reference `c`: within the innermost frame that can resolve
    /// it, the owning relation must be unique (catalog metadata decides which
    /// relations have the column).
    fn resolve_unqualified(
        &mut self,
        scopes: &[Frame],
        column: &str,
        output_fallback: Option<&[OutCol]>,
    ) -> Result<BTreeSet<SchemaItemId>> {
        for frame in scopes.iter().rev() {
            let owners: Vec<Relation> = frame
                .iter()
                .filter(|r| relation_has_column(self.catalog, r, column))
                .cloned()
                .collect();
            match owners.len() {
                0 => continue,
                1 => {
                    if frame.len() > 1 {
                        self.diagnostics.push(format!(
                            "resolved unqualified `{column}` to `{}` among {} in-scope relations",
                            owners[0].alias,
                            frame.len()
                        ));
                    }
                    let deps = self.resolve_in_relation(&owners[0], column)?;
                    self.record_deps(&deps);
                    return Ok(deps);
                }
                _ => {
                    return Err(Error::AmbiguousColumn {
                        column: column.to_string(),
                        candidates: owners.iter().map(|r| r.alias.clone()).collect(),
                    })
                }
            }
        }
        if let Some(cols) = output_fallback {
            let matches: Vec<&OutCol> = cols
                .iter()
                .filter(|c| c.name.as_deref() == Some(column))
                .collect();
            if matches.len() == 1 {
                let deps = matches[0].deps.clone();
                self.record_deps(&deps);
                return Ok(deps);
            }
        }
        Err(Error::UnknownIdentifier(format!("column `{column}`")))
    }

    // -- relations ----------------------------------------------------------

    fn register_table_factor(
        &mut self,
        factor: &sql::TableFactor,
        ctx: &Ctx,
        frame: &mut Frame,
    ) -> Result<()> {
        match factor {
            sql::TableFactor::Table { name, alias, .. } => {
                let parts: Vec<String> = name
                    .0
                    .iter()
                    .map(|i| i.value.to_lowercase())
                    .collect();
                let base = parts.last().cloned().unwrap_or_default();
                let alias_name = alias
                    .as_ref()
                    .map(|a| a.name.value.to_lowercase())
                    .unwrap_or_else(|| base.clone());
                // single-part names may refer to a CTE, which shadows tables
                if parts.len() == 1 {
                    if let Some(cols) = ctx.env.get(&base) {
                        frame.push(Relation {
                            alias: alias_name,
                            kind: RelKind::Derived(cols.clone()),
                        });
                        return Ok(());
                    }
                }
                let tid = self.catalog.resolve_table(&base).ok_or_else(|| {
                    Error::UnknownIdentifier(format!("table `{}`", name))
                })?;
                self.tables.insert(tid.clone());
                frame.push(Relation {
                    alias: alias_name,
                    kind: RelKind::Physical(tid),
                });
                Ok(())
            }
            sql::TableFactor::Derived {
                lateral,
                subquery,
                alias,
            } => {
                if *lateral {
                    return Err(Error::Unsupported("LATERAL subquery".into()));
                }
                let mut cols = self.analyze_query(subquery, ctx)?;
                let alias_name = match alias {
                    Some(a) => {
                        rename_columns(&mut cols, a);
                        a.name.value.to_lowercase()
                    }
                    None => String::new(),
                };
                frame.push(Relation {
                    alias: alias_name,
                    kind: RelKind::Derived(cols),
                });
                Ok(())
            }
            sql::TableFactor::NestedJoin {
                table_with_joins, ..
            } => self.register_table_with_joins(table_with_joins, ctx, frame),
            other => Err(Error::Unsupported(format!("table factor `{other}`"))),
        }
    }

    fn register_table_with_joins(
        &mut self,
        twj: &sql::TableWithJoins,
        ctx: &Ctx,
        frame: &mut Frame,
    ) -> Result<()> {
        self.register_table_factor(&twj.relation, ctx, frame)?;
        for join in &twj.joins {
            self.register_table_factor(&join.relation, ctx, frame)?;
        }
        Ok(())
    }

    fn walk_join_constraints(
        &mut self,
        twj: &sql::TableWithJoins,
        ctx: &Ctx,
        scopes: &[Frame],
    ) -> Result<()> {
        for join in &twj.joins {
            let constraint = match &join.join_operator {
                sql::JoinOperator::Inner(c)
                | sql::JoinOperator::LeftOuter(c)
                | sql::JoinOperator::RightOuter(c)
                | sql::JoinOperator::FullOuter(c)
                | sql::JoinOperator::Semi(c)
                | sql::JoinOperator::LeftSemi(c)
                | sql::JoinOperator::RightSemi(c)
                | sql::JoinOperator::Anti(c)
                | sql::JoinOperator::LeftAnti(c)
                | sql::JoinOperator::RightAnti(c)
                | sql::JoinOperator::AsOf { constraint: c, .. } => Some(c),
                sql::JoinOperator::CrossJoin
                | sql::JoinOperator::CrossApply
                | sql::JoinOperator::OuterApply => None,
            };
            match constraint {
                Some(sql::JoinConstraint::On(expr)) => {
                    self.walk_expr(expr, ctx, scopes, None)?;
                }
                Some(sql::JoinConstraint::Using(idents)) => {
                    // a USING key counts as a reference in every relation of
                    // the local frame that carries the column
                    let frame = scopes.last().cloned().unwrap_or_default();
                    for ident in idents {
                        let column = ident.value.to_lowercase();
                        let mut found = false;
                        for rel in &frame {
                            if relation_has_column(self.catalog, rel, &column) {
                                let deps = self.resolve_in_relation(rel, &column)?;
                                self.record_deps(&deps);
                                found = true;
                            }
                        }
                        if !found {
                            return Err(Error::UnknownIdentifier(format!(
                                "USING column `{column}`"
                            )));
                        }
                    }
                }
                Some(sql::JoinConstraint::Natural) => {
                    return Err(Error::Unsupported("NATURAL join".into()))
                }
                Some(sql::JoinConstraint::None) | None => {}
            }
        }
        Ok(())
    }

    // -- queries ------------------------------------------------------------

    fn analyze_query(&mut self, query: &sql::Query, ctx: &Ctx) -> Result<Vec<OutCol>> {
        let mut env = ctx.env.clone();
        if let Some(with) = &query.with {
            if with.recursive {
                return Err(Error::Unsupported("recursive CTE".into()));
            }
            for cte in &with.cte_tables {
                let inner = Ctx {
                    env: env.clone(),
                    outer: ctx.outer,
                };
                let mut cols = self.analyze_query(&cte.query, &inner)?;
                rename_columns(&mut cols, &cte.alias);
                env.insert(cte.alias.name.value.to_lowercase(), cols);
            }
        }
        let ctx = Ctx {
            env,
            outer: ctx.outer,
        };
        let cols = self.analyze_set_expr(&query.body, &ctx, query.order_by.as_ref())?;
        if let Some(sql::Offset { value, .. }) = &query.offset {
            self.walk_expr(value, &ctx, ctx.outer, None)?;
        }
        if let Some(limit) = &query.limit {
            self.walk_expr(limit, &ctx, ctx.outer, None)?;
        }
        Ok(cols)
    }

    fn analyze_set_expr(
        &mut self,
        body: &sql::SetExpr,
        ctx: &Ctx,
        order_by: Option<&sql::OrderBy>,
    ) -> Result<Vec<OutCol>> {
        match body {
            sql::SetExpr::Select(select) => self.analyze_select(select, ctx, order_by),
            sql::SetExpr::Query(query) => {
                let cols = self.analyze_query(query, ctx)?;
                self.walk_order_by_against_outputs(order_by, ctx, &cols)?;
                Ok(cols)
            }
            sql::SetExpr::SetOperation { left, right, .. } => {
                let lcols = self.analyze_set_expr(left, ctx, None)?;
                let rcols = self.analyze_set_expr(right, ctx, None)?;
                // union branch lineage position-wise; names from the left
                let cols: Vec<OutCol> = lcols
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut c)| {
                        if let Some(r) = rcols.get(i) {
                            c.deps.extend(r.deps.iter().cloned());
                        }
                        c
                    })
                    .collect();
                self.walk_order_by_against_outputs(order_by, ctx, &cols)?;
                Ok(cols)
            }
            other => Err(Error::Unsupported(format!("query body `{other}`"))),
        }
    }

    /// ORDER BY of a set operation or nested query can only reference output
    /// column names (or constants).
    fn walk_order_by_against_outputs(
        &mut self,
        order_by: Option<&sql::OrderBy>,
        _ctx: &Ctx,
        cols: &[OutCol],
    ) -> Result<()> {
        let Some(order_by) = order_by else {
            return Ok(());
        };
        for obe in &order_by.exprs {
            match &obe.expr {
                sql::Expr::Value(_) => {}
                sql::Expr::Identifier(ident) => {
                    let name = ident.value.to_lowercase();
                    let matches: Vec<&OutCol> = cols
                        .iter()
                        .filter(|c| c.name.as_deref() == Some(name.as_str()))
                        .collect();
                    if matches.len() == 1 {
                        let deps = matches[0].deps.clone();
                        self.record_deps(&deps);
                    } else {
                        return Err(Error::UnknownIdentifier(format!(
                            "ORDER BY column `{name}`"
                        )));
                    }
                }
                other => {
                    return Err(Error::Unsupported(format!(
                        "ORDER BY expression `{other}` on a set operation"
                    )))
                }
            }
        }
        Ok(())
    }

    fn analyze_select(
        &mut self,
        select: &sql::Select,
        ctx: &Ctx,
        order_by: Option<&sql::OrderBy>,
    ) -> Result<Vec<OutCol>> {
        let mut frame: Frame = Vec::new();
        for twj in &select.from {
            self.register_table_with_joins(twj, ctx, &mut frame)?;
        }
        let mut scopes: Vec<Frame> = ctx.outer.to_vec();
        scopes.push(frame);

        for twj in &select.from {
            self.walk_join_constraints(twj, ctx, &scopes)?;
        }
        if let Some(where_clause) = &select.selection {
            self.walk_expr(where_clause, ctx, &scopes, None)?;
        }
        match &select.group_by {
            sql::GroupByExpr::Expressions(exprs, _) => {
                for e in exprs {
                    if !matches!(e, sql::Expr::Value(_)) {
                        self.walk_expr(e, ctx, &scopes, None)?;
                    }
                }
            }
            sql::GroupByExpr::All(_) => {}
        }
        if let Some(having) = &select.having {
            self.walk_expr(having, ctx, &scopes, None)?;
        }
        for window in &select.named_window {
            if let sql::NamedWindowExpr::WindowSpec(spec) = &window.1 {
                self.walk_window_spec(spec, ctx, &scopes)?;
            }
        }
        if let Some(qualify) = &select.qualify {
            self.walk_expr(qualify, ctx, &scopes, None)?;
        }

        // projection
        let mut cols: Vec<OutCol> = Vec::new();
        for item in &select.projection {
            match item {
                sql::SelectItem::UnnamedExpr(expr) => {
                    let deps = self.walk_expr(expr, ctx, &scopes, None)?;
                    cols.push(OutCol {
                        name: expr_output_name(expr),
                        deps,
                    });
                }
                sql::SelectItem::ExprWithAlias { expr, alias } => {
                    let deps = self.walk_expr(expr, ctx, &scopes, None)?;
                    cols.push(OutCol {
                        name: Some(alias.value.to_lowercase()),
                        deps,
                    });
                }
                sql::SelectItem::Wildcard(_) => {
                    let frame = scopes.last().cloned().unwrap_or_default();
                    for rel in &frame {
                        self.expand_wildcard(rel, &mut cols)?;
                    }
                }
                sql::SelectItem::QualifiedWildcard(name, _) => {
                    let qualifier = name
                        .0
                        .last()
                        .map(|i| i.value.to_lowercase())
                        .unwrap_or_default();
                    let frame = scopes.last().cloned().unwrap_or_default();
                    let rel = frame
                        .iter()
                        .find(|r| r.alias == qualifier)
                        .cloned()
                        .ok_or_else(|| {
                            Error::UnknownIdentifier(format!("table or alias `{qualifier}`"))
                        })?;
                    self.expand_wildcard(&rel, &mut cols)?;
                }
            }
        }

        if let Some(order_by) = order_by {
            for obe in &order_by.exprs {
                if matches!(obe.expr, sql::Expr::Value(_)) {
                    continue; // positional or constant
                }
                self.walk_expr(&obe.expr, ctx, &scopes, Some(&cols))?;
            }
        }
        for e in &select.sort_by {
            self.walk_expr(e, ctx, &scopes, Some(&cols))?;
        }
        Ok(cols)
    }

    fn expand_wildcard(&mut self, rel: &Relation, cols: &mut Vec<OutCol>) -> Result<()> {
        match &rel.kind {
            RelKind::Physical(tid) => {
                let fields = self.catalog.fields_of(tid);
                self.diagnostics.push(format!(
                    "star expansion: `{}` -> {} fields",
                    rel.alias,
                    fields.len()
                ));
                for f in fields {
                    self.fields.insert(f.clone());
                    cols.push(OutCol {
                        name: f.field.as_ref().map(|s| s.to_lowercase()),
                        deps: [f].into_iter().collect(),
                    });
                }
            }
            RelKind::Derived(inner) => {
                // the subquery's references were already counted
                cols.extend(inner.iter().cloned());
            }
        }
        Ok(())
    }

    fn walk_window_spec(
        &mut self,
        spec: &sql::WindowSpec,
        ctx: &Ctx,
        scopes: &[Frame],
    ) -> Result<()> {
        for e in &spec.partition_by {
            self.walk_expr(e, ctx, scopes, None)?;
        }
        for obe in &spec.order_by {
            self.walk_expr(&obe.expr, ctx, scopes, None)?;
        }
        Ok(())
    }

    // -- expressions --------------------------------------------------------

    fn walk_subquery(
        &mut self,
        query: &sql::Query,
        ctx: &Ctx,
        scopes: &[Frame],
    ) -> Result<BTreeSet<SchemaItemId>> {
        let inner = Ctx {
            env: ctx.env.clone(),
            outer: scopes,
        };
        let cols = self.analyze_query(query, &inner)?;
        Ok(cols.into_iter().flat_map(|c| c.deps).collect())
    }

    fn walk_expr(
        &mut self,
        expr: &sql::Expr,
        ctx: &Ctx,
        scopes: &[Frame],
        output_fallback: Option<&[OutCol]>,
    ) -> Result<BTreeSet<SchemaItemId>> {
        let mut deps = BTreeSet::new();
        let walk_all = |this: &mut Self, exprs: Vec<&sql::Expr>| -> Result<BTreeSet<SchemaItemId>> {
            let mut acc = BTreeSet::new();
            for e in exprs {
                acc.extend(this.walk_expr(e, ctx, scopes, output_fallback)?);
            }
            Ok(acc)
        };
        match expr {
            sql::Expr::Identifier(ident) => {
                deps = self.resolve_unqualified(
                    scopes,
                    &ident.value.to_lowercase(),
                    output_fallback,
                )?;
            }
            sql::Expr::CompoundIdentifier(parts) => {
                if parts.len() < 2 {
                    return Err(Error::SqlParse("empty compound identifier".into()));
                }
                let column = parts.last().unwrap().value.to_lowercase();
                let qualifier = parts[parts.len() - 2].value.to_lowercase();
                deps = self.resolve_qualified(scopes, &qualifier, &column)?;
            }
            sql::Expr::Value(_) | sql::Expr::TypedString { .. } => {}
            sql::Expr::Wildcard(_) | sql::Expr::QualifiedWildcard(_, _) => {
                // COUNT(*) style: no specific field dependency
            }
            sql::Expr::BinaryOp { left, right, .. } => {
                deps = walk_all(self, vec![left, right])?;
            }
            sql::Expr::UnaryOp { expr, .. }
            | sql::Expr::Nested(expr)
            | sql::Expr::IsNull(expr)
            | sql::Expr::IsNotNull(expr)
            | sql::Expr::IsTrue(expr)
            | sql::Expr::IsNotTrue(expr)
            | sql::Expr::IsFalse(expr)
            | sql::Expr::IsNotFalse(expr)
            | sql::Expr::IsUnknown(expr)
            | sql::Expr::IsNotUnknown(expr) => {
                deps = walk_all(self, vec![expr])?;
            }
            sql::Expr::IsDistinctFrom(a, b) | sql::Expr::IsNotDistinctFrom(a, b) => {
                deps = walk_all(self, vec![a, b])?;
            }
            sql::Expr::InList { expr, list, .. } => {
                let mut exprs: Vec<&sql::Expr> = vec![expr];
                exprs.extend(list.iter());
                deps = walk_all(self, exprs)?;
            }
            sql::Expr::InSubquery { expr, subquery, .. } => {
                deps = walk_all(self, vec![expr])?;
                deps.extend(self.walk_subquery(subquery, ctx, scopes)?);
            }
            sql::Expr::Between {
                expr, low, high, ..
            } => {
                deps = walk_all(self, vec![expr, low, high])?;
            }
            sql::Expr::Like { expr, pattern, .. }
            | sql::Expr::ILike { expr, pattern, .. }
            | sql::Expr::SimilarTo { expr, pattern, .. } => {
                deps = walk_all(self, vec![expr, pattern])?;
            }
            sql::Expr::Cast { expr, .. } => {
                deps = walk_all(self, vec![expr])?;
            }
            sql::Expr::Extract { expr, .. }
            | sql::Expr::Ceil { expr, .. }
            | sql::Expr::Floor { expr, .. } => {
                deps = walk_all(self, vec![expr])?;
            }
            sql::Expr::Position { expr, r#in } => {
                deps = walk_all(self, vec![expr, r#in])?;
            }
            sql::Expr::Substring {
                expr,
                substring_from,
                substring_for,
                ..
            } => {
                let mut exprs: Vec<&sql::Expr> = vec![expr];
                if let Some(e) = substring_from {
                    exprs.push(e);
                }
                if let Some(e) = substring_for {
                    exprs.push(e);
                }
                deps = walk_all(self, exprs)?;
            }
            sql::Expr::Trim {
                expr, trim_what, ..
            } => {
                let mut exprs: Vec<&sql::Expr> = vec![expr];
                if let Some(e) = trim_what {
                    exprs.push(e);
                }
                deps = walk_all(self, exprs)?;
            }
            sql::Expr::Case {
                operand,
                conditions,
                results,
                else_result,
            } => {
                let mut exprs: Vec<&sql::Expr> = Vec::new();
                if let Some(e) = operand {
                    exprs.push(e);
                }
                exprs.extend(conditions.iter());
                exprs.extend(results.iter());
                if let Some(e) = else_result {
                    exprs.push(e);
                }
                deps = walk_all(self, exprs)?;
            }
            sql::Expr::Tuple(exprs) => {
                deps = walk_all(self, exprs.iter().collect())?;
            }
            sql::Expr::Exists { subquery, .. } | sql::Expr::Subquery(subquery) => {
                deps = self.walk_subquery(subquery, ctx, scopes)?;
            }
            sql::Expr::AnyOp { left, right, .. } | sql::Expr::AllOp { left, right, .. } => {
                deps = walk_all(self, vec![left, right])?;
            }
            sql::Expr::Interval(interval) => {
                deps = walk_all(self, vec![&interval.value])?;
            }
            sql::Expr::Collate { expr, .. } => {
                deps = walk_all(self, vec![expr])?;
            }
            sql::Expr::Function(func) => {
                deps = self.walk_function(func, ctx, scopes, output_fallback)?;
            }
            other => {
                return Err(Error::Unsupported(format!("expression `{other}`")));
            }
        }
        Ok(deps)
    }

    fn walk_function(
        &mut self,
        func: &sql::Function,
        ctx: &Ctx,
        scopes: &[Frame],
        output_fallback: Option<&[OutCol]>,
    ) -> Result<BTreeSet<SchemaItemId>> {
        let mut deps = BTreeSet::new();
        match &func.args {
            sql::FunctionArguments::None => {}
            sql::FunctionArguments::Subquery(q) => {
                deps.extend(self.walk_subquery(q, ctx, scopes)?);
            }
            sql::FunctionArguments::List(list) => {
                for arg in &list.args {
                    let arg_expr = match arg {
                        sql::FunctionArg::Named { arg, .. }
                        | sql::FunctionArg::ExprNamed { arg, .. }
                        | sql::FunctionArg::Unnamed(arg) => arg,
                    };
                    match arg_expr {
                        sql::FunctionArgExpr::Expr(e) => {
                            deps.extend(self.walk_expr(e, ctx, scopes, output_fallback)?);
                        }
                        sql::FunctionArgExpr::Wildcard
                        | sql::FunctionArgExpr::QualifiedWildcard(_) => {}
                    }
                }
            }
        }
        if let Some(filter) = &func.filter {
            deps.extend(self.walk_expr(filter, ctx, scopes, output_fallback)?);
        }
        match &func.over {
            Some(sql::WindowType::WindowSpec(spec)) => {
                for e in &spec.partition_by {
                    deps.extend(self.walk_expr(e, ctx, scopes, output_fallback)?);
                }
                for obe in &spec.order_by {
                    deps.extend(self.walk_expr(&obe.expr, ctx, scopes, output_fallback)?);
                }
            }
            Some(sql::WindowType::NamedWindow(_)) | None => {}
        }
        for obe in &func.within_group {
            deps.extend(self.walk_expr(&obe.expr, ctx, scopes, output_fallback)?);
        }
        Ok(deps)
    }
}

fn expr_output_name(expr: &sql::Expr) -> Option<String> {
    match expr {
        sql::Expr::Identifier(i) => Some(i.value.to_lowercase()),
        sql::Expr::CompoundIdentifier(parts) => {
            parts.last().map(|i| i.value.to_lowercase())
        }
        _ => None,
    }
}

fn rename_columns(cols: &mut [OutCol], alias: &sql::TableAlias) {
    for (col, name) in cols.iter_mut().zip(alias.columns.iter()) {
        col.name = Some(name.name.value.to_lowercase());
    }
}

// ---------------------------------------------------------------------------
// Second-opinion pass

/// Syntactic re-walk of the AST, independent of the scope resolver: collects
/// every relation name and every terminal column identifier. Used to
/// cross-check the resolved gold sets.
fn syntactic_names(query: &sql::Query) -> (BTreeSet<String>, BTreeSet<String>) {
    use core::ops::ControlFlow;
    use sqlparser::ast::{Visit, Visitor};

    #[derive(Default)]
    struct Collector {
        relations: BTreeSet<String>,
        columns: BTreeSet<String>,
    }
    impl Visitor for Collector {
        type Break = ();
        fn pre_visit_relation(&mut self, relation: &sql::ObjectName) -> ControlFlow<()> {
            if let Some(last) = relation.0.last() {
                self.relations.insert(last.value.to_lowercase());
            }
            ControlFlow::Continue(())
        }
        fn pre_visit_expr(&mut self, expr: &sql::Expr) -> ControlFlow<()> {
            match expr {
                sql::Expr::Identifier(i) => {
                    self.columns.insert(i.value.to_lowercase());
                }
                sql::Expr::CompoundIdentifier(parts) => {
                    if let Some(last) = parts.last() {
                        self.columns.insert(last.value.to_lowercase());
                    }
                }
                _ => {}
            }
            ControlFlow::Continue(())
        }
    }
    let mut c = Collector::default();
    let _ = query.visit(&mut c);
    (c.relations, c.columns)
}

/// Resolved gold tables and fields for one query.
#[derive(Debug)]
pub struct GoldExtraction {
    pub tables: BTreeSet<SchemaItemId>,
    pub fields: BTreeSet<SchemaItemId>,
    pub diagnostics: Vec<String>,
}

/// Extract gold tables and fields from one SQL query via scope analysis and
/// alias resolution, then cross-check with the syntactic second opinion.
pub fn extract_gold(
    sql_text: &str,
    catalog: &SchemaCatalog,
    dialect: SqlDialect,
) -> Result<GoldExtraction> {
    let query = parse_sql(sql_text, dialect)?;
    let mut resolver = Resolver::new(catalog);
    let ctx = Ctx {
        env: CteEnv::new(),
        outer: &[],
    };
    resolver.analyze_query(&query, &ctx)?;

    let mut diagnostics = resolver.diagnostics;
    let star_expanded = diagnostics.iter().any(|d| d.starts_with("star expansion"));
    let (syn_relations, syn_columns) = syntactic_names(&query);
    for t in &resolver.tables {
        if !syn_relations.contains(&t.table.to_lowercase()) {
            diagnostics.push(format!(
                "second opinion: table `{t}` not seen in the syntactic walk"
            ));
        }
    }
    for f in &resolver.fields {
        let name = f.field.as_deref().unwrap_or("").to_lowercase();
        if !syn_columns.contains(&name) && !star_expanded {
            diagnostics.push(format!(
                "second opinion: field `{f}` not seen in the syntactic walk"
            ));
        }
    }

    // field-table closure is structural, but assert it anyway
    for f in &resolver.fields {
        if !resolver.tables.contains(&f.parent_table()) {
            return Err(Error::Integrity(format!(
                "gold field `{f}` lacks its parent table"
            )));
        }
    }

    Ok(GoldExtraction {
        tables: resolver.tables,
        fields: resolver.fields,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// Corpus extraction

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusInstance {
    pub instance_id: String,
    pub database: String,
    pub sql: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionError {
    pub instance_id: String,
    pub error: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CorpusReport {
    pub gold: Vec<GoldSchema>,
    pub errors: Vec<ExtractionError>,
}

/// Extract gold schemas for a corpus; per-instance failures are collected,
/// not fatal.
pub fn extract_corpus(
    instances: &[CorpusInstance],
    catalogs: &BTreeMap<String, SchemaCatalog>,
    dialect: SqlDialect,
) -> CorpusReport {
    let mut report = CorpusReport::default();
    for inst in instances {
        let Some(catalog) = catalogs.get(&inst.database) else {
            report.errors.push(ExtractionError {
                instance_id: inst.instance_id.clone(),
                error: format!("no catalog for database `{}`", inst.database),
            });
            continue;
        };
        match extract_gold(&inst.sql, catalog, dialect) {
            Ok(ex) => report.gold.push(GoldSchema {
                instance_id: inst.instance_id.clone(),
                database: inst.database.clone(),
                tables: ex.tables,
                fields: ex.fields,
                diagnostics: ex.diagnostics,
            }),
            Err(e) => report.errors.push(ExtractionError {
                instance_id: inst.instance_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    report
}
